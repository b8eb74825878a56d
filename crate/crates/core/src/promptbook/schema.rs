use super::{AnswerType, Promptbook};

/// JSON primitive (plus constraints) expected for one output field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    String,
    /// Integer, optionally restricted to an inclusive range.
    Integer { range: Option<(i64, i64)> },
    Decimal,
    /// String drawn from a fixed category set.
    Categorical(Vec<String>),
}

impl FieldKind {
    /// Type name shown to the model in the schema block.
    pub fn json_type_name(&self) -> &'static str {
        match self {
            FieldKind::String | FieldKind::Categorical(_) => "string",
            FieldKind::Integer { .. } => "integer",
            FieldKind::Decimal => "number",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaField {
    pub name: String,
    pub kind: FieldKind,
    pub verbatim: bool,
    pub missing_sentinel: String,
}

/// Ordered output contract, one field per promptbook variable.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSchema {
    pub fields: Vec<SchemaField>,
}

impl OutputSchema {
    pub fn field(&self, name: &str) -> Option<&SchemaField> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

pub fn schema_of(book: &Promptbook) -> OutputSchema {
    let fields = book
        .variables
        .iter()
        .map(|v| SchemaField {
            name: v.name.clone(),
            kind: match v.answer_type {
                AnswerType::String => FieldKind::String,
                AnswerType::Integer => FieldKind::Integer { range: None },
                AnswerType::Binary => FieldKind::Integer { range: Some((0, 1)) },
                AnswerType::Decimal => FieldKind::Decimal,
                AnswerType::Categorical => FieldKind::Categorical(v.categories.clone()),
            },
            verbatim: v.verbatim,
            missing_sentinel: v.missing_sentinel.clone(),
        })
        .collect();
    OutputSchema { fields }
}
