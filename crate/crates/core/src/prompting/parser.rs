use regex::{Captures, Regex};

use super::template::{Segment, Slot, Template};
use super::{IclExample, PromptError, ShotMode, TemplateRegistry, TemplateSpec};
use crate::corpus::{LanguageNames, LanguagePair};

/// A prompt recognised as the rendering of a registered template.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub family: String,
    pub shot_mode: ShotMode,
    pub direction: LanguagePair,
    pub word: String,
    pub examples: Vec<IclExample>,
}

struct Pattern {
    regex: Regex,
    slots: Vec<Slot>,
}

#[derive(Default)]
struct Filled {
    source_language: Option<String>,
    target_language: Option<String>,
    source_word: Option<String>,
    target_word: Option<String>,
}

impl Pattern {
    fn build(
        template: &Template,
        lang_alt: &str,
        quote_source: bool,
        prefix: &str,
        suffix: &str,
    ) -> Self {
        let mut source = String::from(prefix);
        let mut slots = Vec::new();
        for segment in template.segments() {
            match segment {
                Segment::Literal(text) => source.push_str(&regex::escape(text)),
                Segment::Slot(slot) => {
                    slots.push(*slot);
                    match slot {
                        Slot::SourceLanguage | Slot::TargetLanguage => {
                            source.push_str(&format!("({lang_alt})"))
                        }
                        Slot::SourceWord if quote_source => source.push_str(r"'(\S+)'"),
                        Slot::SourceWord | Slot::TargetWord => source.push_str(r"(\S+)"),
                    }
                }
            }
        }
        source.push_str(suffix);
        Self {
            regex: Regex::new(&source).expect("template regex compiles"),
            slots,
        }
    }

    /// Maps captures onto slots; a slot repeated with different values
    /// rejects the match.
    fn extract(&self, caps: &Captures<'_>) -> Option<Filled> {
        let mut filled = Filled::default();
        for (i, slot) in self.slots.iter().enumerate() {
            let value = caps.get(i + 1)?.as_str().to_string();
            let field = match slot {
                Slot::SourceLanguage => &mut filled.source_language,
                Slot::TargetLanguage => &mut filled.target_language,
                Slot::SourceWord => &mut filled.source_word,
                Slot::TargetWord => &mut filled.target_word,
            };
            match field {
                Some(prev) if *prev != value => return None,
                _ => *field = Some(value),
            }
        }
        Some(filled)
    }
}

struct FamilyPatterns {
    spec: TemplateSpec,
    zero: Pattern,
    item: Pattern,
    query: Pattern,
}

/// Recovers (direction, query word, examples) from rendered prompts.
///
/// Language placeholders only match registered names, so the parser knows
/// exactly which names can occur. Every candidate parse is re-rendered and
/// compared with the input, so a returned parse always reproduces the
/// prompt byte for byte.
pub struct PromptParser {
    families: Vec<FamilyPatterns>,
    names: LanguageNames,
}

impl PromptParser {
    pub fn new(templates: &TemplateRegistry, names: &LanguageNames) -> Result<Self, PromptError> {
        let mut langs: Vec<&str> = names.iter().map(|(_, n)| n).collect();
        if langs.is_empty() {
            return Err(PromptError::UnknownLanguage("<none registered>".into()));
        }
        langs.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let lang_alt = langs
            .iter()
            .map(|n| regex::escape(n))
            .collect::<Vec<_>>()
            .join("|");
        let families = templates
            .specs()
            .map(|spec| FamilyPatterns {
                zero: Pattern::build(&spec.zero_shot, &lang_alt, false, "^", "$"),
                item: Pattern::build(&spec.few_shot_item, &lang_alt, spec.quote_source, "^", ""),
                query: Pattern::build(&spec.few_shot_query, &lang_alt, spec.quote_source, "", "$"),
                spec: spec.clone(),
            })
            .collect();
        Ok(Self {
            families,
            names: names.clone(),
        })
    }

    fn direction(&self, filled: &Filled) -> Option<LanguagePair> {
        let src = self.names.code(filled.source_language.as_deref()?)?;
        let tgt = self.names.code(filled.target_language.as_deref()?)?;
        LanguagePair::new(src, tgt).ok()
    }

    pub fn parse(&self, prompt: &str) -> Option<ParsedPrompt> {
        self.families.iter().find_map(|f| {
            self.parse_zero(f, prompt)
                .or_else(|| self.parse_few(f, prompt))
        })
    }

    fn parse_zero(&self, f: &FamilyPatterns, prompt: &str) -> Option<ParsedPrompt> {
        let caps = f.zero.regex.captures(prompt)?;
        let filled = f.zero.extract(&caps)?;
        let direction = self.direction(&filled)?;
        let word = filled.source_word?;
        let rendered = f
            .spec
            .render_zero_shot(&self.names, &direction, &word)
            .ok()?;
        (rendered == prompt).then(|| ParsedPrompt {
            family: f.spec.family.clone(),
            shot_mode: ShotMode::Zero,
            direction,
            word,
            examples: Vec::new(),
        })
    }

    fn parse_few(&self, f: &FamilyPatterns, prompt: &str) -> Option<ParsedPrompt> {
        let caps = f.query.regex.captures(prompt)?;
        let start = caps.get(0)?.start();
        let filled = f.query.extract(&caps)?;
        let direction = self.direction(&filled)?;
        let word = filled.source_word?;

        let prefix = prompt[..start].strip_suffix(' ')?;
        let mut examples = Vec::new();
        let mut rest = prefix;
        while !rest.is_empty() {
            let caps = f.item.regex.captures(rest)?;
            let item = f.item.extract(&caps)?;
            if self.direction(&item)? != direction {
                return None;
            }
            examples.push(IclExample::new(item.source_word?, item.target_word?));
            rest = &rest[caps.get(0)?.end()..];
            match rest.strip_prefix(' ') {
                Some(r) => rest = r,
                None if rest.is_empty() => {}
                None => return None,
            }
        }
        if examples.is_empty() {
            return None;
        }
        let rendered = f
            .spec
            .render_few_shot(&self.names, &direction, &examples, &word)
            .ok()?;
        (rendered == prompt).then(|| ParsedPrompt {
            family: f.spec.family.clone(),
            shot_mode: ShotMode::Few,
            direction,
            word,
            examples,
        })
    }
}
