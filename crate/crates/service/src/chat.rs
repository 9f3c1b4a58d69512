//! Line-oriented terminal chat.

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use tod_core::{DomainDictionary, Engine, Session};

/// How a chat loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChatOutcome {
    Completed,
    /// Input ended before the dialogue did.
    InputEnded,
}

fn say(out: &mut impl Write, text: &str) -> io::Result<()> {
    writeln!(out, "TOD: {text}")
}

/// Reads user lines from `input` and prints TOD utterances to `out` until the
/// dialogue completes or input ends. Blank lines are ignored. Engine errors
/// are reported and the line can be retried; only I/O errors abort.
pub fn run_chat(
    dictionary: Arc<DomainDictionary>,
    engine: Engine,
    input: impl BufRead,
    out: &mut impl Write,
) -> io::Result<ChatOutcome> {
    let mut session = Session::new("terminal", dictionary, engine);
    say(out, &session.start().tod_utterance)?;
    out.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match session.advance(Some(&line)) {
            Ok(turn) => {
                say(out, &turn.tod_utterance)?;
                if let Some(slots) = turn.final_slots {
                    let json = serde_json::to_string(&slots).map_err(io::Error::other)?;
                    writeln!(out, "final predefined_slots: {json}")?;
                    out.flush()?;
                    return Ok(ChatOutcome::Completed);
                }
            }
            Err(e) => writeln!(out, "error: {e} (please try again)")?,
        }
        out.flush()?;
    }
    writeln!(out, "input ended; the conversation is incomplete")?;
    out.flush()?;
    Ok(ChatOutcome::InputEnded)
}
