use serde::{Deserialize, Serialize};

/// Household and kitchen tools recognised by the fallback classifier.
pub const DEFAULT_LEXICON: &[&str] = &[
    "knife", "spoon", "fork", "spatula", "ladle", "whisk", "peeler", "grater", "scissors", "tongs",
    "chopsticks", "brush", "sponge", "towel", "cloth", "rag", "scraper", "hammer", "screwdriver",
    "wrench", "pliers", "saw", "drill", "chisel", "trowel", "shovel", "rake", "broom", "mop",
    "pen", "pencil", "marker", "ruler", "stapler", "needle", "hook", "stick", "rolling pin",
    "masher", "strainer", "colander", "sieve", "skewer", "cutter", "blade", "razor", "comb",
    "toothbrush", "lighter", "tweezers", "opener", "corkscrew", "squeegee", "trimmer", "shears",
    "scoop", "baster", "skimmer", "pestle", "mallet", "paintbrush", "cleaver", "knives",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    HandObject,
    ToolObject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    External,
    LexiconFallback,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionLabel {
    pub kind: InteractionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
    pub source: LabelSource,
    /// Free-form note on where an external label came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

impl InteractionLabel {
    pub fn hand(source: LabelSource) -> Self {
        Self { kind: InteractionKind::HandObject, tool_name: None, source, origin: None }
    }

    pub fn tool(name: impl Into<String>, source: LabelSource) -> Self {
        Self { kind: InteractionKind::ToolObject, tool_name: Some(name.into()), source, origin: None }
    }

    /// A tool name is present, and non-empty, exactly for tool interactions.
    pub fn is_valid(&self) -> bool {
        let has_tool = self.tool_name.as_deref().is_some_and(|t| !t.trim().is_empty());
        match self.kind {
            InteractionKind::ToolObject => has_tool,
            InteractionKind::HandObject => self.tool_name.is_none(),
        }
    }
}

/// Label supplied alongside a clip by an upstream classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalLabel {
    pub kind: InteractionKind,
    #[serde(default)]
    pub tool_name: Option<String>,
    #[serde(default)]
    pub source: Option<String>,
}

impl ExternalLabel {
    pub fn to_label(&self) -> Option<InteractionLabel> {
        let tool_name = match self.kind {
            InteractionKind::ToolObject => self.tool_name.clone(),
            InteractionKind::HandObject => None,
        };
        let label = InteractionLabel {
            kind: self.kind,
            tool_name,
            source: LabelSource::External,
            origin: self.source.clone(),
        };
        label.is_valid().then_some(label)
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

// First lexicon entry, by position in `text`, matching whole words.
// A trailing "s"/"es" on the last word counts as a match.
fn find_tool<S: AsRef<str>>(text: &str, lexicon: &[S]) -> Option<String> {
    let toks = words(text);
    let entries: Vec<(String, Vec<String>)> =
        lexicon.iter().map(|e| (e.as_ref().trim().to_lowercase(), words(e.as_ref()))).filter(|(_, w)| !w.is_empty()).collect();
    for start in 0..toks.len() {
        for (name, ew) in &entries {
            if start + ew.len() > toks.len() {
                continue;
            }
            let last = ew.len() - 1;
            let hit = ew.iter().enumerate().all(|(i, w)| {
                let t = &toks[start + i];
                t == w || (i == last && (t == &format!("{w}s") || t == &format!("{w}es")))
            });
            if hit {
                return Some(name.clone());
            }
        }
    }
    None
}

/// Decides hand- vs tool-object interaction. Searches `description` first,
/// then the preceding descriptions in order.
pub fn classify_interaction<S: AsRef<str>>(description: &str, prev: &[String], lexicon: &[S]) -> InteractionLabel {
    std::iter::once(description)
        .chain(prev.iter().map(String::as_str))
        .find_map(|t| find_tool(t, lexicon))
        .map(|tool| InteractionLabel::tool(tool, LabelSource::LexiconFallback))
        .unwrap_or_else(|| InteractionLabel::hand(LabelSource::LexiconFallback))
}

/// An external label wins when present and valid.
pub fn resolve_interaction<S: AsRef<str>>(
    external: Option<&ExternalLabel>,
    description: &str,
    prev: &[String],
    lexicon: &[S],
) -> Result<InteractionLabel, String> {
    match external {
        Some(e) => e.to_label().ok_or_else(|| "external interaction label is inconsistent".to_string()),
        None => Ok(classify_interaction(description, prev, lexicon)),
    }
}
