use serde::{Deserialize, Serialize};

use crate::error::LlmError;

/// The base cataloguing instructions: title, abstract, JSON reply.
pub const CATALOGUER_PROMPT: &str = "You are a diligent cataloguer working to create metadata for websites. Let's think step by step to ensure accurate and comprehensive metadata creation:

1) Determine the title of the organization or company on the main web page, ensuring it reflects the primary focus or name without additional descriptors. It should match the root domain of the web page.

2) Create an abstract: Summarize the main content of the website in a brief and informative abstract.

3) Format the Result: Return the result in JSON format as {'title': [inferred_title], 'abstract': [created_abstract]}.";

/// Abstract templates per site type, appended to [`CATALOGUER_PROMPT`].
pub const SUMMARY_RULES: &str = "Summarize the content of the website following these rules:

- For company websites:
This is the website of (company’s name) which offers (services). The website contains information of (contact, operating hours, location, its services, customers’ testimonials).

- For websites selling properties:
(Name of project) is a private residential development by (name of company). The project is located at xxx. This website contains information on (the condominium, location, floor plans, developer and contact details).

- For personal websites/blogs:
This is a website of (Name of person), (role). This website contains information on (work experience, profile, education, research works, projects, publications, professional development, skills, portfolio).

- For others, create a summary.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    #[serde(alias = "with_rules", alias = "WithRules")]
    Rules,
    #[serde(alias = "without_rules", alias = "WithoutRules")]
    NoRules,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 2] = [PromptVariant::Rules, PromptVariant::NoRules];

    pub fn system_text(self) -> String {
        match self {
            PromptVariant::NoRules => CATALOGUER_PROMPT.to_string(),
            PromptVariant::Rules => format!("{CATALOGUER_PROMPT}\n\n{SUMMARY_RULES}"),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PromptVariant::Rules => "With Rules",
            PromptVariant::NoRules => "Without Rules",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace(['_', '-', ' '], "").as_str() {
            "rules" | "withrules" => Some(PromptVariant::Rules),
            "norules" | "withoutrules" => Some(PromptVariant::NoRules),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// `[system prompt, user: site URL + newline + content]`. The URL lets the
/// model match the title to the root domain.
pub fn build_prompt(variant: PromptVariant, content: &str, site_url: &str) -> Result<Vec<ChatMessage>, LlmError> {
    if content.trim().is_empty() {
        return Err(LlmError::EmptyContent);
    }
    Ok(vec![
        ChatMessage::system(variant.system_text()),
        ChatMessage::user(format!("{site_url}\n{content}")),
    ])
}
