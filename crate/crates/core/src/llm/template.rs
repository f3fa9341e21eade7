//! The four prompt families, each in a product and a wiki variant, plus the
//! hint-augmented inference prompt.
//!
//! Templates are plain text with `{{slot}}` placeholders. List slots are
//! serialized here, not by callers: candidate, retrieved-label and hint lists
//! as 1-indexed lines, demonstrations as title lines followed by a JSON array
//! of their label texts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Product,
    Wiki,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Product => "product",
            Domain::Wiki => "wiki",
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Domain::Product),
            "wiki" => Ok(Domain::Wiki),
            other => Err(Error::Config(format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemplateKind {
    /// t1: pseudo demonstration inputs from the test instance.
    ContentDemos,
    /// t2: one pseudo input per retrieved label.
    LabelDemos,
    /// t3: in-context inference of raw labels.
    Inference,
    /// t3 without demonstrations, with retrieved labels offered as hints.
    HintInference,
    /// t4: listwise selection over the shortlist.
    Rerank,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 5] = [
        TemplateKind::ContentDemos,
        TemplateKind::LabelDemos,
        TemplateKind::Inference,
        TemplateKind::HintInference,
        TemplateKind::Rerank,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            TemplateKind::ContentDemos => "t1",
            TemplateKind::LabelDemos => "t2",
            TemplateKind::Inference => "t3",
            TemplateKind::HintInference => "t3h",
            TemplateKind::Rerank => "t4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TemplateId {
    pub kind: TemplateKind,
    pub domain: Domain,
}

impl TemplateId {
    pub fn new(kind: TemplateKind, domain: Domain) -> Self {
        Self { kind, domain }
    }

    fn source(self) -> &'static str {
        use Domain::*;
        use TemplateKind::*;
        match (self.kind, self.domain) {
            (ContentDemos, Product) => T1_PRODUCT,
            (ContentDemos, Wiki) => T1_WIKI,
            (LabelDemos, Product) => T2_PRODUCT,
            (LabelDemos, Wiki) => T2_WIKI,
            (Inference, Product) => T3_PRODUCT,
            (Inference, Wiki) => T3_WIKI,
            (HintInference, Product) => T3_HINT_PRODUCT,
            (HintInference, Wiki) => T3_HINT_WIKI,
            (Rerank, Product) => T4_PRODUCT,
            (Rerank, Wiki) => T4_WIKI,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind.tag(), self.domain.as_str())
    }
}

const T1_PRODUCT: &str = "\
Product title: {{title}}
Task: Please predict at least {{count}} relevant and diverse Amazon products titles.
Format: {{title_format}}, do not say any word or explain.
Product Description: {{content}}
";

const T1_WIKI: &str = "\
Wiki title: {{title}}
Task: Please generate at least {{count}} relevant and diverse Wikipedia page titles.
Format: {{title_format}}, do not say any word or explain.
Wiki content: {{content}}
";

const T2_PRODUCT: &str = "\
For an Amazon product recommendation task,
Product title: {{title}}
Candidate labels:
{{labels}}Task: For each label, guess an input title.
Format: [\"title1\", \"title2\", \"title3\", \"title4\", \"title5\"], each title is a guess based on a candidate label, title1 is a guess for first label, and so on. Only output one list and the list should be of size {{label_count}}. do not explain or say anthing.
";

const T2_WIKI: &str = "\
As 'See Also' pages of {{title}}
There's a list of Wikipedia page titles:
{{labels}}Task: For each page, generate a \"See also\" page title.
Format: [\"title1\", \"title2\", \"title3\", \"title4\", \"title5\"], each title is a guess based on a candidate label, title1 is a guess for first label, and so on. Only output one list and the list should be of size {{label_count}}. do not explain or say anthing.
";

const T3_PRODUCT: &str = "\
{{demonstrations}}Task: Please predict at least {{count}} relevant products for a new Amazon product title:
{{title}}
Product Description: {{content}}
Format: Only output titles with line break, do not include anything else.
";

const T3_WIKI: &str = "\
{{demonstrations}}Title: {{title}}
Content: {{content}}
Task: Generate 'See also' suggestions related to the Wikipedia title {{title}}
Format: Only output titles with line break, do not include anything else.
";

const T3_HINT_PRODUCT: &str = "\
Task: Please predict at least {{count}} relevant products for a new Amazon product title:
{{title}}
Product Description: {{content}}
Hints:
{{hints}}Format: Only output titles with line break, do not include anything else.
";

const T3_HINT_WIKI: &str = "\
Title: {{title}}
Content: {{content}}
Hints:
{{hints}}Task: Generate 'See also' suggestions related to the Wikipedia title {{title}}
Format: Only output titles with line break, do not include anything else.
";

const T4_PRODUCT: &str = "\
Task: Given a query product, select the top {{count}} most relevant products from a list of candidates.
Query product title: {{title}}
Format: A list of integers representing the indices of the top {{count}} most possible titles.
Example: {{index_example}}
Candidates:
{{candidates}}Product Description: {{content}}
";

const T4_WIKI: &str = "\
Task: From the following candidate list of Wikipedia pages, select top {{count}} that would be most relevant for the 'See also' section of the given page:
Wiki title: {{title}}
Format: A list of integers representing the indices of the top {{count}} most possible titles.
Example: {{index_example}}
Candidates:
{{candidates}}Wiki Content: {{content}}
";

/// A demonstration as it appears in a prompt: pseudo input and label texts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoText {
    pub input: String,
    pub labels: Vec<String>,
}

/// Slot values. A template fails to render if it references a slot left as
/// `None`; slots it does not reference are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub title: Option<&'a str>,
    pub content: Option<&'a str>,
    /// Requested output size (m for t1, k for t3, K for t4).
    pub count: Option<usize>,
    pub demonstrations: Option<&'a [DemoText]>,
    /// Retrieved labels for t2, positionally aligned with the expected output.
    pub labels: Option<&'a [String]>,
    pub candidates: Option<&'a [String]>,
    pub hints: Option<&'a [String]>,
}

fn one_line(s: &str) -> String {
    s.split(['\n', '\r']).collect::<Vec<_>>().join(" ")
}

fn numbered(items: &[String]) -> String {
    let mut out = String::new();
    for (i, item) in items.iter().enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, one_line(item)));
    }
    out
}

fn demo_block(domain: Domain, demos: &[DemoText]) -> String {
    let (input_key, label_key) = match domain {
        Domain::Product => ("Product title", "Relevant product"),
        Domain::Wiki => ("Wiki title", "'See Also' pages"),
    };
    let mut out = String::new();
    for d in demos {
        let labels = serde_json::to_string(&d.labels).expect("strings serialize");
        out.push_str(&format!(
            "{input_key}: {}\n{label_key}: {labels}\n\n",
            one_line(&d.input)
        ));
    }
    out
}

pub fn render_prompt(id: TemplateId, b: &Bindings<'_>) -> Result<String> {
    let missing = |slot: &'static str| Error::MissingSlot {
        template: id.to_string(),
        slot,
    };
    let source = id.source();
    let mut out = String::with_capacity(source.len() + 256);
    let mut rest = source;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").expect("template placeholders are closed");
        let slot = &after[..end];
        let value = match slot {
            "title" => one_line(b.title.ok_or_else(|| missing("title"))?),
            "content" => b.content.ok_or_else(|| missing("content"))?.to_string(),
            "count" => b.count.ok_or_else(|| missing("count"))?.to_string(),
            "title_format" => {
                let n = b.count.ok_or_else(|| missing("count"))?;
                let items: Vec<String> = (1..=n).map(|i| format!("\"title{i}\"")).collect();
                format!("[{}]", items.join(", "))
            }
            "index_example" => {
                let n = b.count.ok_or_else(|| missing("count"))?;
                let items: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
                format!("[{}]", items.join(", "))
            }
            "demonstrations" => demo_block(
                id.domain,
                b.demonstrations.ok_or_else(|| missing("demonstrations"))?,
            ),
            "labels" => numbered(b.labels.ok_or_else(|| missing("labels"))?),
            "label_count" => b.labels.ok_or_else(|| missing("labels"))?.len().to_string(),
            "candidates" => numbered(b.candidates.ok_or_else(|| missing("candidates"))?),
            "hints" => numbered(b.hints.ok_or_else(|| missing("hints"))?),
            other => unreachable!("template {id} references unknown slot {other}"),
        };
        out.push_str(&value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
