//! Counted, non-fatal loader warnings.

/// Warnings accumulated while loading a file. Loaders skip recoverable
/// problems (blank lines, malformed vectors, duplicate entries) and record
/// one message per incident so callers can count or log them.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Warnings {
    messages: Vec<String>,
}

impl Warnings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, message: impl Into<String>) {
        self.messages.push(message.into());
    }

    pub fn count(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn messages(&self) -> &[String] {
        &self.messages
    }

    /// Emit every message through the `log` facade at warn level.
    pub fn log_all(&self, context: &str) {
        for m in &self.messages {
            log::warn!("{context}: {m}");
        }
    }
}
