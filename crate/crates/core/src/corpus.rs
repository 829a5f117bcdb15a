//! Named problem/plan/transcript corpora.
//!
//! On disk a corpus is a directory with `problems/*.pddl`, `plans/*.plan`
//! and `transcripts/*.json` (a JSON array of raw completion strings). The
//! built-in corpus is compiled in and can be written out with
//! [`Corpus::write_to`].

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::pddl::{parse_problem, PddlError, Problem};
use crate::plan::{parse_plan, Plan, PlanError};

pub const BUILTIN_CORPUS_NAME: &str = "builtin";

const BUILTIN_PROBLEMS: &[(&str, &str)] = &[
    ("oldprob1", include_str!("../corpus/builtin/problems/oldprob1.pddl")),
    ("oldprob2", include_str!("../corpus/builtin/problems/oldprob2.pddl")),
    ("newprob", include_str!("../corpus/builtin/problems/newprob.pddl")),
    (
        "literal-gap",
        include_str!("../corpus/builtin/problems/literal-gap.pddl"),
    ),
];

const BUILTIN_PLANS: &[(&str, &str)] = &[
    ("oldprob1", include_str!("../corpus/builtin/plans/oldprob1.plan")),
    ("oldprob2", include_str!("../corpus/builtin/plans/oldprob2.plan")),
    (
        "newprob-incorrect",
        include_str!("../corpus/builtin/plans/newprob-incorrect.plan"),
    ),
    (
        "newprob-corrected",
        include_str!("../corpus/builtin/plans/newprob-corrected.plan"),
    ),
    (
        "newprob-prefix",
        include_str!("../corpus/builtin/plans/newprob-prefix.plan"),
    ),
    ("literal-gap", include_str!("../corpus/builtin/plans/literal-gap.plan")),
];

const BUILTIN_TRANSCRIPTS: &[(&str, &str)] = &[("newprob", include_str!("../corpus/builtin/transcripts/newprob.json"))];

/// Natural-language operator descriptions and the translation instruction,
/// for manual use through an oracle. Nothing consumes their output.
const PROMPT_ASSETS: &[(&str, &str)] = &[
    (
        "translate-instruction",
        include_str!("../corpus/builtin/prompts/translate-instruction.txt"),
    ),
    ("state-class", include_str!("../corpus/builtin/prompts/state-class.txt")),
    ("pick-up", include_str!("../corpus/builtin/prompts/pick-up.txt")),
    ("put-down", include_str!("../corpus/builtin/prompts/put-down.txt")),
    ("stack", include_str!("../corpus/builtin/prompts/stack.txt")),
    ("unstack", include_str!("../corpus/builtin/prompts/unstack.txt")),
];

pub fn prompt_asset(name: &str) -> Option<&'static str> {
    PROMPT_ASSETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn prompt_asset_names() -> impl Iterator<Item = &'static str> {
    PROMPT_ASSETS.iter().map(|(n, _)| *n)
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{name}: {source}")]
    Problem { name: String, source: PddlError },
    #[error("{name}: {source}")]
    Plan { name: String, source: PlanError },
    #[error("{name}: {source}")]
    Transcript { name: String, source: serde_json::Error },
    #[error("no entry named `{0}`")]
    Missing(String),
}

/// Raw corpus texts keyed by file stem.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub problems: BTreeMap<String, String>,
    pub plans: BTreeMap<String, String>,
    pub transcripts: BTreeMap<String, String>,
}

fn owned(entries: &[(&str, &str)]) -> BTreeMap<String, String> {
    entries.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

impl Corpus {
    pub fn builtin() -> Self {
        Corpus {
            problems: owned(BUILTIN_PROBLEMS),
            plans: owned(BUILTIN_PLANS),
            transcripts: owned(BUILTIN_TRANSCRIPTS),
        }
    }

    /// `builtin` selects the built-in corpus; anything else is a directory.
    pub fn load(name_or_dir: &str) -> Result<Self, CorpusError> {
        if name_or_dir == BUILTIN_CORPUS_NAME {
            Ok(Corpus::builtin())
        } else {
            Corpus::from_dir(Path::new(name_or_dir))
        }
    }

    pub fn from_dir(dir: &Path) -> Result<Self, CorpusError> {
        Ok(Corpus {
            problems: read_kind(&dir.join("problems"), "pddl")?,
            plans: read_kind(&dir.join("plans"), "plan")?,
            transcripts: read_kind(&dir.join("transcripts"), "json")?,
        })
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), CorpusError> {
        for (sub, ext, entries) in [
            ("problems", "pddl", &self.problems),
            ("plans", "plan", &self.plans),
            ("transcripts", "json", &self.transcripts),
        ] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(|e| io_err(&d, e))?;
            for (name, text) in entries {
                let path = d.join(format!("{name}.{ext}"));
                fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            }
        }
        Ok(())
    }

    pub fn problem(&self, name: &str) -> Result<Problem, CorpusError> {
        let text = self
            .problems
            .get(name)
            .ok_or_else(|| CorpusError::Missing(name.into()))?;
        parse_problem(text).map_err(|source| CorpusError::Problem {
            name: name.into(),
            source,
        })
    }

    /// Parses a plan against the objects of `problem`.
    pub fn plan(&self, name: &str, problem: &Problem) -> Result<Plan, CorpusError> {
        let text = self.plans.get(name).ok_or_else(|| CorpusError::Missing(name.into()))?;
        parse_plan(text, &problem.objects)
            .map(|p| p.plan)
            .map_err(|source| CorpusError::Plan {
                name: name.into(),
                source,
            })
    }

    pub fn transcript(&self, name: &str) -> Result<Vec<String>, CorpusError> {
        let text = self
            .transcripts
            .get(name)
            .ok_or_else(|| CorpusError::Missing(name.into()))?;
        serde_json::from_str(text).map_err(|source| CorpusError::Transcript {
            name: name.into(),
            source,
        })
    }
}

fn io_err(path: &Path, source: io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_kind(dir: &Path, ext: &str) -> Result<BTreeMap<String, String>, CorpusError> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        out.insert(stem.to_string(), text);
    }
    Ok(out)
}
