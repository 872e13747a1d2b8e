use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{IclExample, PromptError, ShotMode, TemplateId};
use crate::corpus::{LanguageNames, LanguagePair};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Slot {
    SourceLanguage,
    TargetLanguage,
    SourceWord,
    TargetWord,
}

impl Slot {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "source_language" => Self::SourceLanguage,
            "target_language" => Self::TargetLanguage,
            "source_word" => Self::SourceWord,
            "target_word" => Self::TargetWord,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Segment {
    Literal(String),
    Slot(Slot),
}

/// A template string split into literal text and placeholders.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Template {
    raw: String,
    segments: Vec<Segment>,
}

pub(crate) struct Fields<'a> {
    pub source_language: &'a str,
    pub target_language: &'a str,
    pub source_word: &'a str,
    pub target_word: &'a str,
}

impl Template {
    pub fn parse(raw: &str) -> Result<Self, String> {
        let mut segments = Vec::new();
        let mut rest = raw;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                segments.push(Segment::Literal(rest[..open].to_string()));
            }
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| format!("unclosed placeholder in {raw:?}"))?;
            let name = &rest[open + 1..open + close];
            let slot =
                Slot::from_name(name).ok_or_else(|| format!("unknown placeholder {{{name}}}"))?;
            segments.push(Segment::Slot(slot));
            rest = &rest[open + close + 1..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Literal(rest.to_string()));
        }
        Ok(Self {
            raw: raw.to_string(),
            segments,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub(crate) fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub(crate) fn has(&self, slot: Slot) -> bool {
        self.segments.contains(&Segment::Slot(slot))
    }

    pub(crate) fn render_into(&self, out: &mut String, fields: &Fields<'_>, quote_source: bool) {
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Slot(Slot::SourceLanguage) => out.push_str(fields.source_language),
                Segment::Slot(Slot::TargetLanguage) => out.push_str(fields.target_language),
                Segment::Slot(Slot::SourceWord) if quote_source => {
                    out.push('\'');
                    out.push_str(fields.source_word);
                    out.push('\'');
                }
                Segment::Slot(Slot::SourceWord) => out.push_str(fields.source_word),
                Segment::Slot(Slot::TargetWord) => out.push_str(fields.target_word),
            }
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl TryFrom<String> for Template {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<Template> for String {
    fn from(t: Template) -> Self {
        t.raw
    }
}

/// The prompts of one model family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub family: String,
    pub zero_shot: Template,
    pub few_shot_item: Template,
    pub few_shot_query: Template,
    /// Wrap source words of few-shot prompts in single quotes.
    #[serde(default)]
    pub quote_source: bool,
}

const ZERO_THE_WORD_IS: &str = "The {source_language} word {source_word} in {target_language} is:";
const ZERO_TRANSLATE_FROM: &str =
    "Translate from {source_language} to {target_language}: {source_word}=>";
const ZERO_CHAT: &str =
    "Translate the {source_language} word {source_word} into {target_language}:";
const FEW_ITEM: &str =
    "The {source_language} word {source_word} in {target_language} is {target_word}.";
const FEW_QUERY: &str = "The {source_language} word {source_word} in {target_language} is";

impl TemplateSpec {
    pub fn new(
        family: &str,
        zero_shot: &str,
        few_shot_item: &str,
        few_shot_query: &str,
        quote_source: bool,
    ) -> Result<Self, PromptError> {
        let invalid = |reason: String| PromptError::InvalidTemplate {
            family: family.to_string(),
            reason,
        };
        let spec = Self {
            family: family.to_string(),
            zero_shot: Template::parse(zero_shot).map_err(invalid)?,
            few_shot_item: Template::parse(few_shot_item).map_err(invalid)?,
            few_shot_query: Template::parse(few_shot_query).map_err(invalid)?,
            quote_source,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn builtin(family: &str, zero: &str, quote_source: bool) -> Self {
        Self::new(family, zero, FEW_ITEM, FEW_QUERY, quote_source).expect("builtin template")
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let invalid = |reason: &str| PromptError::InvalidTemplate {
            family: self.family.clone(),
            reason: reason.to_string(),
        };
        if !self.zero_shot.has(Slot::SourceWord) || self.zero_shot.has(Slot::TargetWord) {
            return Err(invalid(
                "zero_shot needs {source_word} and no {target_word}",
            ));
        }
        if !self.few_shot_item.has(Slot::SourceWord) || !self.few_shot_item.has(Slot::TargetWord) {
            return Err(invalid(
                "few_shot_item needs {source_word} and {target_word}",
            ));
        }
        if !self.few_shot_query.has(Slot::SourceWord) || self.few_shot_query.has(Slot::TargetWord) {
            return Err(invalid(
                "few_shot_query needs {source_word} and no {target_word}",
            ));
        }
        Ok(())
    }

    /// Zero-shot prompt with language names given directly.
    pub fn fill_zero_shot(
        &self,
        source_language: &str,
        target_language: &str,
        word: &str,
    ) -> String {
        let mut out = String::new();
        self.zero_shot.render_into(
            &mut out,
            &Fields {
                source_language,
                target_language,
                source_word: word,
                target_word: "",
            },
            false,
        );
        out
    }

    /// Few-shot prompt with language names given directly. Examples are
    /// rendered in the order given.
    pub fn fill_few_shot(
        &self,
        source_language: &str,
        target_language: &str,
        examples: &[IclExample],
        word: &str,
    ) -> String {
        let mut out = String::new();
        for example in examples {
            self.few_shot_item.render_into(
                &mut out,
                &Fields {
                    source_language,
                    target_language,
                    source_word: &example.source_word,
                    target_word: &example.target_word,
                },
                self.quote_source,
            );
            out.push(' ');
        }
        self.few_shot_query.render_into(
            &mut out,
            &Fields {
                source_language,
                target_language,
                source_word: word,
                target_word: "",
            },
            self.quote_source,
        );
        out
    }

    pub fn render_zero_shot(
        &self,
        names: &LanguageNames,
        pair: &LanguagePair,
        word: &str,
    ) -> Result<String, PromptError> {
        let (src, tgt) = language_names(names, pair)?;
        Ok(self.fill_zero_shot(src, tgt, word))
    }

    pub fn render_few_shot(
        &self,
        names: &LanguageNames,
        pair: &LanguagePair,
        examples: &[IclExample],
        word: &str,
    ) -> Result<String, PromptError> {
        if examples.is_empty() {
            return Err(PromptError::NoExamples);
        }
        let (src, tgt) = language_names(names, pair)?;
        Ok(self.fill_few_shot(src, tgt, examples, word))
    }
}

pub(crate) fn language_names<'a>(
    names: &'a LanguageNames,
    pair: &LanguagePair,
) -> Result<(&'a str, &'a str), PromptError> {
    let lookup = |code: &str| {
        names
            .name(code)
            .ok_or_else(|| PromptError::UnknownLanguage(code.to_string()))
    };
    Ok((lookup(pair.source())?, lookup(pair.target())?))
}

/// Template specs keyed by model family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateRegistry {
    specs: BTreeMap<String, TemplateSpec>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateRegistry {
    /// The four LLaMA families plus the chat protocol.
    ///
    /// LLaMA-2 7B uses unquoted few-shot source words; the others quote
    /// them. LLaMA 13B has its own zero-shot prompt. The chat family has no
    /// few-shot prompt of its own and reuses the quoted LLaMA one.
    pub fn builtin() -> Self {
        let specs = [
            TemplateSpec::builtin("llama7b", ZERO_THE_WORD_IS, true),
            TemplateSpec::builtin("llama2_7b", ZERO_THE_WORD_IS, false),
            TemplateSpec::builtin("llama13b", ZERO_TRANSLATE_FROM, true),
            TemplateSpec::builtin("llama2_13b", ZERO_THE_WORD_IS, true),
            TemplateSpec::builtin("chat", ZERO_CHAT, true),
        ];
        Self {
            specs: specs.into_iter().map(|s| (s.family.clone(), s)).collect(),
        }
    }

    pub fn empty() -> Self {
        Self {
            specs: BTreeMap::new(),
        }
    }

    /// Adds or replaces a family.
    pub fn insert(&mut self, spec: TemplateSpec) -> Result<(), PromptError> {
        spec.validate()?;
        self.specs.insert(spec.family.clone(), spec);
        Ok(())
    }

    pub fn get(&self, family: &str) -> Result<&TemplateSpec, PromptError> {
        self.specs
            .get(family)
            .ok_or_else(|| PromptError::UnknownFamily(family.to_string()))
    }

    pub fn families(&self) -> impl Iterator<Item = &str> {
        self.specs.keys().map(String::as_str)
    }

    pub fn specs(&self) -> impl Iterator<Item = &TemplateSpec> {
        self.specs.values()
    }

    /// Renders the prompt for `id`; few-shot mode requires examples.
    pub fn render(
        &self,
        id: &TemplateId,
        names: &LanguageNames,
        pair: &LanguagePair,
        examples: &[IclExample],
        word: &str,
    ) -> Result<String, PromptError> {
        let spec = self.get(&id.family)?;
        match id.shot_mode {
            ShotMode::Zero => spec.render_zero_shot(names, pair, word),
            ShotMode::Few => spec.render_few_shot(names, pair, examples, word),
        }
    }
}
