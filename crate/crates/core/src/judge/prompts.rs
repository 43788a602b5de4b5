//! The four judging prompt templates, frozen byte-for-byte.
//!
//! Placeholders are substituted verbatim — no trimming, escaping, or other
//! normalization of the instruction/response text — so a cached prompt is a
//! pure function of its inputs.

use thiserror::Error;

use crate::model::Realization;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("the anchor realization needs the anchor system's response text")]
    MissingAnchor,
    #[error("anchor text was supplied for the non-anchor realization `{0}`")]
    UnexpectedAnchor(&'static str),
    #[error("reward scores are produced offline; there is no reward prompt")]
    RewardHasNoPrompt,
}

/// Render the judging prompt for one (instruction, response) pair.
/// `anchor_text` must be present exactly when the realization is `Anchor`.
pub fn render_prompt(
    realization: &Realization,
    instruction: &str,
    response: &str,
    anchor_text: Option<&str>,
) -> Result<String, PromptError> {
    if anchor_text.is_some() && !matches!(realization, Realization::Anchor { .. }) {
        return Err(PromptError::UnexpectedAnchor(realization.tag()));
    }
    match realization {
        Realization::Numeric => Ok(format!(
            "Here is a user input and a model response. On a scale of 0 to 100, \
             to what extent is this a good response for the given input? Reply \
             with your rating score without any preceding explanation. \
             Input: {instruction}\n\nResponse: {response}\n\nRating (0-100):"
        )),
        Realization::Likert => Ok(format!(
            "Here is a user input and a model response. To what extent is this \
             a good response for the given input? Provide a rating from one of \
             the following choices: 'Very Bad', 'Bad', 'Mediocre', 'Good', \
             'Very Good'. Reply using the format of [[rating]], for example: \
             '[[Mediocre]]'\n\nInput: {instruction}\n\nResponse: {response}\n\nRating:"
        )),
        Realization::TokenProbs => Ok(format!(
            "Here is a user input and a model response. Is this a good response \
             for the given input? Answer with only yes/no. \
             Input: {instruction}\n\nResponse: {response}\n\nGood response? (Yes/No):"
        )),
        Realization::Anchor { .. } => {
            let anchor = anchor_text.ok_or(PromptError::MissingAnchor)?;
            Ok(format!(
                "Here is a user input and responses from two assistants, A and B. \
                 Which response is better? You must output only one of the \
                 following choices as your final verdict with a label:\n\n\
                 1. Assistant A is significantly better: [[A>>B]]\n\
                 2. Assistant A is slightly better: [[A>B]]\n\
                 3. Tie, relatively the same: [[A=B]]\n\
                 4. Assistant B is slightly better: [[B>A]]\n\
                 5. Assistant B is significantly better: [[B>>A]]\n\n\
                 Example output: \"My final verdict is tie: [[A=B]]\".\n\n\
                 <|User Prompt|>\n{instruction}\n\n\
                 <|The Start of Assistant A's Answer|>\n{response}\n\
                 <|The End of Assistant A's Answer|>\n\n\
                 <|The Start of Assistant B's Answer|>\n{anchor}\n\
                 <|The End of Assistant B's Answer|>\n\nFinal Verdict:"
            ))
        }
        Realization::Reward => Err(PromptError::RewardHasNoPrompt),
    }
}
