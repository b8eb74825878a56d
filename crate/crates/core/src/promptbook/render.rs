use std::fmt::Write;

use super::{schema_of, AnswerType, Promptbook};

/// Slot in the user template replaced by the document text.
pub const DOCUMENT_PLACEHOLDER: &str = "{{document}}";

/// The output-format directive every rendered prompt carries.
pub const ONLY_JSON_DIRECTIVE: &str = "Return **ONLY** a JSON array of objects.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    /// Coding manual, output format and a [`DOCUMENT_PLACEHOLDER`] slot.
    pub user_template: String,
}

impl RenderedPrompt {
    /// User message for one document. The text is inserted once and never
    /// rescanned for placeholders.
    pub fn user_message(&self, document: &str) -> String {
        self.user_template.replacen(DOCUMENT_PLACEHOLDER, document, 1)
    }

    /// Template with the slot removed, for prompt-overhead estimates.
    pub fn template_without_slot(&self) -> String {
        self.user_template.replacen(DOCUMENT_PLACEHOLDER, "", 1)
    }
}

/// Render the system and user prompt. Pure: equal books render identically.
pub fn render_prompt(book: &Promptbook) -> RenderedPrompt {
    let mut user = String::new();
    for v in &book.variables {
        let _ = write!(user, "- {} = {}", v.name, v.instruction);
        // Spell out the category set when the instruction does not list it.
        if v.answer_type == AnswerType::Categorical
            && !v.categories.iter().all(|c| v.instruction.contains(c.as_str()))
        {
            let _ = write!(user, " Allowed values: {}.", v.categories.join(", "));
        }
        user.push('\n');
    }

    user.push_str("\nOutput Format\n\n");
    user.push_str(ONLY_JSON_DIRECTIVE);
    user.push_str(
        " Do not include markdown formatting like ```json or intro text. Use this exact schema:\n\n",
    );
    user.push_str("[\n{\n");
    let schema = schema_of(book);
    let n = schema.fields.len();
    for (i, f) in schema.fields.iter().enumerate() {
        let sep = if i + 1 < n { "," } else { "" };
        let _ = writeln!(user, "  \"{}\": \"{}\"{sep}", f.name, f.kind.json_type_name());
    }
    user.push_str("}\n]\n\nText:\n");
    user.push_str(DOCUMENT_PLACEHOLDER);
    user.push('\n');

    RenderedPrompt {
        system: book.role_preamble.clone(),
        user_template: user,
    }
}
