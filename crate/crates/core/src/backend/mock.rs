use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    finish_response, BackendError, BackendIdentity, BackendKind, CompletionBackend,
    CompletionRequest, ScoredContinuation,
};
use crate::corpus::{LanguageNames, LanguagePair};
use crate::prompting::{PromptParser, TemplateRegistry};

/// Out-of-vocabulary filler a consistency mock appends to every response.
pub const DISTRACTOR: &str = "qxqzv";

const ANSWER_SCORE: f64 = -0.1;
const DISTRACTOR_SCORE: f64 = -0.9;

fn one() -> usize {
    1
}

/// A synthetic bilingual world answering translation prompts from tables.
///
/// All maps are keyed by direction (`"de-fr"`). A word listed in `noise`
/// is answered with the noisy translation instead of the clean one.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyWorld {
    pub translations: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    pub noise: BTreeMap<String, BTreeMap<String, String>>,
    /// Words a zero-shot prompt gets right, per direction. Absent means all.
    #[serde(default)]
    pub zero_shot_known: Option<BTreeMap<String, BTreeSet<String>>>,
    /// Few-shot prompts with fewer examples than this act like zero-shot.
    #[serde(default = "one")]
    pub min_shots: usize,
}

impl ConsistencyWorld {
    /// The translation the world gives for `word` in `direction` when the
    /// prompt carries `shots` in-context examples.
    pub fn answer(&self, direction: &LanguagePair, word: &str, shots: usize) -> Option<&str> {
        let dir = direction.to_string();
        if shots < self.min_shots.max(1) {
            if let Some(known) = &self.zero_shot_known {
                if !known.get(&dir).is_some_and(|s| s.contains(word)) {
                    return None;
                }
            }
        }
        if let Some(noisy) = self.noise.get(&dir).and_then(|m| m.get(word)) {
            return Some(noisy);
        }
        self.translations
            .get(&dir)
            .and_then(|m| m.get(word))
            .map(String::as_str)
    }

    /// Answer as beam 1 (score -0.1), then the distractor (score -0.9).
    pub fn respond(
        &self,
        direction: &LanguagePair,
        word: &str,
        shots: usize,
    ) -> Vec<ScoredContinuation> {
        let mut out = Vec::with_capacity(2);
        if let Some(answer) = self.answer(direction, word, shots) {
            out.push(ScoredContinuation::new(format!(" {answer}."), ANSWER_SCORE));
        }
        out.push(ScoredContinuation::new(
            format!(" {DISTRACTOR}"),
            DISTRACTOR_SCORE,
        ));
        out
    }
}

/// Builds a consistency world from clean translation maps plus, per
/// direction, the words to mistranslate.
///
/// A noisy word is answered with the clean translation of the next source
/// word (in sorted order, wrapping around), so its answer stays in the
/// target vocabulary but does not survive a round trip.
pub fn make_consistency_mock(
    forward: BTreeMap<LanguagePair, BTreeMap<String, String>>,
    noise: BTreeMap<LanguagePair, BTreeSet<String>>,
) -> ConsistencyWorld {
    let mut world = ConsistencyWorld {
        min_shots: 1,
        ..Default::default()
    };
    for (dir, map) in &forward {
        let keys: Vec<&String> = map.keys().collect();
        if let Some(noisy) = noise.get(dir) {
            let mut corrupted = BTreeMap::new();
            for w in noisy {
                let Some(i) = keys.iter().position(|k| *k == w) else {
                    continue;
                };
                let wrong = if keys.len() > 1 {
                    map[keys[(i + 1) % keys.len()]].clone()
                } else {
                    DISTRACTOR.to_string()
                };
                corrupted.insert(w.clone(), wrong);
            }
            world.noise.insert(dir.to_string(), corrupted);
        }
        world.translations.insert(dir.to_string(), map.clone());
    }
    world
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MockSpec {
    /// Exact prompt to response lookup.
    Table {
        responses: BTreeMap<String, Vec<ScoredContinuation>>,
    },
    Consistency {
        world: ConsistencyWorld,
    },
}

impl MockSpec {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("mock spec serializes");
        std::fs::write(path, text + "\n")
    }
}

pub struct TableMock {
    model_id: String,
    responses: BTreeMap<String, Vec<ScoredContinuation>>,
}

impl TableMock {
    pub fn new(
        model_id: impl Into<String>,
        responses: BTreeMap<String, Vec<ScoredContinuation>>,
    ) -> Self {
        Self {
            model_id: model_id.into(),
            responses,
        }
    }
}

impl CompletionBackend for TableMock {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<ScoredContinuation>, BackendError> {
        req.validate()?;
        let found = self
            .responses
            .get(&req.prompt)
            .ok_or_else(|| BackendError::MockMiss(req.prompt.clone()))?;
        finish_response(req, found.clone())
    }

    fn identity(&self) -> BackendIdentity {
        mock_identity(&self.model_id)
    }
}

pub struct ConsistencyMock {
    model_id: String,
    world: ConsistencyWorld,
    parser: PromptParser,
}

impl ConsistencyMock {
    pub fn new(
        model_id: impl Into<String>,
        world: ConsistencyWorld,
        templates: &TemplateRegistry,
        names: &LanguageNames,
    ) -> Result<Self, BackendError> {
        let parser =
            PromptParser::new(templates, names).map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            model_id: model_id.into(),
            world,
            parser,
        })
    }

    pub fn world(&self) -> &ConsistencyWorld {
        &self.world
    }
}

impl CompletionBackend for ConsistencyMock {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<ScoredContinuation>, BackendError> {
        req.validate()?;
        let parsed = self
            .parser
            .parse(&req.prompt)
            .ok_or_else(|| BackendError::UnrecognizedPrompt(req.prompt.clone()))?;
        let out = self
            .world
            .respond(&parsed.direction, &parsed.word, parsed.examples.len());
        finish_response(req, out)
    }

    fn identity(&self) -> BackendIdentity {
        mock_identity(&self.model_id)
    }
}

fn mock_identity(model_id: &str) -> BackendIdentity {
    BackendIdentity {
        kind: BackendKind::Mock,
        model_id: model_id.to_string(),
        temperature: None,
        system_message: None,
    }
}

pub enum MockBackend {
    Table(TableMock),
    Consistency(ConsistencyMock),
}

impl MockBackend {
    pub fn new(
        spec: MockSpec,
        model_id: &str,
        templates: &TemplateRegistry,
        names: &LanguageNames,
    ) -> Result<Self, BackendError> {
        Ok(match spec {
            MockSpec::Table { responses } => Self::Table(TableMock::new(model_id, responses)),
            MockSpec::Consistency { world } => {
                Self::Consistency(ConsistencyMock::new(model_id, world, templates, names)?)
            }
        })
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<ScoredContinuation>, BackendError> {
        match self {
            Self::Table(m) => m.complete(req),
            Self::Consistency(m) => m.complete(req),
        }
    }

    fn identity(&self) -> BackendIdentity {
        match self {
            Self::Table(m) => m.identity(),
            Self::Consistency(m) => m.identity(),
        }
    }
}
