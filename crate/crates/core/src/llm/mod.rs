//! Prompt templates, keyword extraction and a record/replay chat client.

mod client;
mod keywords;

pub use client::{ChatClient, ChatProvider, ChatRecord, HttpChatProvider};
pub use keywords::{fallback_keywords, parse_keyword_response, FallbackKeywords, STOPWORDS};

use serde::{Deserialize, Serialize};

use crate::corpus::RetrievalMethod;
use crate::error::{Error, Result};
use crate::textproc::split_sentences;

pub const SYSTEM_MESSAGE: &str = "You are a helpful and kind AI Assistant.";

pub const COT_SYSTEM_MESSAGE: &str = "You are a helpful and kind AI Assistant. If there is multiple \
answer/reasons depending on the situation you can ask for my situation and provide answers/reasons \
step-by-step as a list.";

pub const KEYWORD_SUFFIX: &str = " Given the paragraph above, show the keywords in it:";

/// Contexts with more sentences than this are filtered out before answer
/// generation.
pub const MAX_CONTEXT_SENTENCES: usize = 40;

/// A system/user message pair for one chat completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_message: String,
    pub user_message: String,
    /// The retrieval method whose template produced an answer prompt;
    /// `None` for keyword prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method_tag: Option<RetrievalMethod>,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

impl PromptBundle {
    /// Pretty-printed `[{"role": "system", ...}, {"role": "user", ...}]`.
    pub fn to_messages_json(&self) -> String {
        let messages = [
            Message {
                role: "system",
                content: &self.system_message,
            },
            Message {
                role: "user",
                content: &self.user_message,
            },
        ];
        serde_json::to_string_pretty(&messages).expect("messages serialize")
    }
}

/// Answer-generation prompt for `method`.
///
/// Sparse and adaptive retrieval use a `Q:`/`A:` body; adaptive adds the
/// step-by-step system message. Both ensemble variants share the verbose
/// template.
pub fn build_answer_prompt(method: RetrievalMethod, question: &str, context: &str) -> Result<PromptBundle> {
    let n = split_sentences(context).len();
    if n > MAX_CONTEXT_SENTENCES {
        return Err(Error::ContextTooLong(n));
    }
    let qa = || format!("{context}\n\nQ: {question}\nA:");
    let (system, user) = match method {
        RetrievalMethod::Sparse => (SYSTEM_MESSAGE, qa()),
        RetrievalMethod::EnsembleTop1 | RetrievalMethod::EnsembleTop3 => (
            SYSTEM_MESSAGE,
            format!("Given the context: \n{context}\n\nPlease answer the question:\n{question}"),
        ),
        RetrievalMethod::AdaptiveEnsemble => (COT_SYSTEM_MESSAGE, qa()),
    };
    Ok(PromptBundle {
        system_message: system.to_string(),
        user_message: user,
        method_tag: Some(method),
    })
}

/// Keyword-extraction prompt: the answer followed by the instruction.
pub fn build_keyword_prompt(answer: &str) -> Result<PromptBundle> {
    if answer.trim().is_empty() {
        return Err(Error::EmptyInput("answer"));
    }
    Ok(PromptBundle {
        system_message: SYSTEM_MESSAGE.to_string(),
        user_message: format!("{answer}{KEYWORD_SUFFIX}"),
        method_tag: None,
    })
}
