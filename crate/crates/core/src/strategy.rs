//! The update strategy: a three-block phase loop over the information state
//! that picks the next dialogue move, runs it, and yields whenever the user
//! has to say something.
//!
//! The loop is written as a resumable state machine. [`Session::advance`]
//! feeds one user utterance and runs moves until the next input point or
//! until the dialogue completes.

use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moves::{self, DialogueMove, LlmClassifier, MoveError, ReplyClassifier, RuleClassifier};
use crate::nlu::{AuditLog, Extractor, LanguageModel, LlmExtractor, RuleExtractor};
use crate::retrieval::{LexicalRanker, Ranker, RetrievalConfig};
use crate::schema::{DomainDictionary, EntityRecord};
use crate::state::{InformationState, TriFlag, INITIAL_PROMPT};

/// Upper bound on moves between two user inputs.
pub const MOVE_BUDGET: usize = 8;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("the dialogue is already completed")]
    Completed,
    #[error("the engine is waiting for user input")]
    InputRequired,
    #[error("the engine is not waiting for a reply to presented output")]
    NothingPresented,
    #[error("user input is empty")]
    EmptyInput,
    #[error("more than {MOVE_BUDGET} moves without user input")]
    MoveBudgetExceeded,
    #[error(transparent)]
    Move(#[from] MoveError),
}

/// Where the engine waits for the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Block 1 waits for a preference statement.
    PreferenceInput,
    /// Block 2 waits for the reply to the more-constraints question.
    MoreConstraintsReply,
    /// Block 3 waits for the reply to the entity table.
    RejectionReply,
    Completed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Tod,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub speaker: Speaker,
    pub text: String,
}

/// One executed move.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Index of the user input that started the run (0 for the initial prompt).
    pub cycle: usize,
    /// Position of the move within its cycle, starting at 1.
    pub phase: usize,
    /// Block of the loop the move belongs to (1, 2, 3; 4 is the completion check).
    pub block: u8,
    #[serde(rename = "move")]
    pub dialogue_move: DialogueMove,
    /// Digest of the control flags after the move.
    pub flags_digest: String,
}

impl TraceEntry {
    pub fn to_line(&self) -> String {
        format!(
            "cycle={} phase={} block={} move={} flags={}",
            self.cycle, self.phase, self.block, self.dialogue_move, self.flags_digest
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnResult {
    pub tod_utterance: String,
    pub awaiting_input: bool,
    pub completed: bool,
    /// Normalized non-none slots; present iff completed.
    pub final_slots: Option<IndexMap<String, String>>,
}

/// The most recent entity table shown to the user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub entities: Vec<EntityRecord>,
    pub table: String,
}

/// Interchangeable components used by a session.
#[derive(Clone)]
pub struct Engine {
    pub extractor: Arc<dyn Extractor>,
    pub classifier: Arc<dyn ReplyClassifier>,
    pub ranker: Arc<dyn Ranker>,
    pub retrieval: RetrievalConfig,
}

impl Engine {
    /// Fully deterministic engine: rule-based extraction and classification,
    /// lexical ranking.
    pub fn rule_based() -> Self {
        Self {
            extractor: Arc::new(RuleExtractor::new()),
            classifier: Arc::new(RuleClassifier),
            ranker: Arc::new(LexicalRanker),
            retrieval: RetrievalConfig::default(),
        }
    }

    /// Language-model extraction and classification over `backend`.
    pub fn with_model(backend: Arc<dyn LanguageModel>) -> Self {
        Self {
            extractor: Arc::new(LlmExtractor::new(backend.clone())),
            classifier: Arc::new(LlmClassifier::new(backend)),
            ranker: Arc::new(LexicalRanker),
            retrieval: RetrievalConfig::default(),
        }
    }
}

impl Default for Engine {
    fn default() -> Self {
        Self::rule_based()
    }
}

/// Where to pick the loop up after a user input.
enum Resume {
    Block1(String),
    Block2Tail(String),
    Block3Tail(Option<String>),
}

#[derive(Clone)]
struct Checkpoint {
    state: InformationState,
    stage: Stage,
    transcript: usize,
    trace: usize,
    cycle: usize,
    presentation: Option<Presentation>,
}

/// One conversation.
pub struct Session {
    id: String,
    state: InformationState,
    engine: Engine,
    stage: Stage,
    transcript: Vec<TranscriptEntry>,
    trace: Vec<TraceEntry>,
    audit: AuditLog,
    cycle: usize,
    phase: usize,
    moves_since_input: usize,
    presentation: Option<Presentation>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("domain", &self.state.domain_caption)
            .field("stage", &self.stage)
            .field("cycle", &self.cycle)
            .finish()
    }
}

impl Session {
    /// Starts a session. The initial prompt is already in the transcript.
    pub fn new(id: impl Into<String>, dictionary: Arc<DomainDictionary>, engine: Engine) -> Self {
        let state = InformationState::new(dictionary);
        let prompt = state.utterance_to_update_predefined_slot.clone();
        Self {
            id: id.into(),
            state,
            engine,
            stage: Stage::PreferenceInput,
            transcript: vec![TranscriptEntry {
                speaker: Speaker::Tod,
                text: prompt,
            }],
            trace: Vec::new(),
            audit: AuditLog::new(),
            cycle: 0,
            phase: 0,
            moves_since_input: 0,
            presentation: None,
        }
    }

    /// The result a client sees before the first input.
    pub fn start(&self) -> TurnResult {
        TurnResult {
            tod_utterance: INITIAL_PROMPT.to_string(),
            awaiting_input: true,
            completed: false,
            final_slots: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> &InformationState {
        &self.state
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn is_completed(&self) -> bool {
        self.stage == Stage::Completed
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn last_presentation(&self) -> Option<&Presentation> {
        self.presentation.as_ref()
    }

    /// Trace export, one line per executed move.
    pub fn export_trace(&self) -> String {
        self.trace.iter().map(|t| t.to_line() + "\n").collect()
    }

    /// Transcript as `SPEAKER: text` lines.
    pub fn transcript_text(&self) -> String {
        self.transcript
            .iter()
            .map(|e| {
                let who = match e.speaker {
                    Speaker::User => "USER",
                    Speaker::Tod => "TOD",
                };
                format!("{who}: {}\n", e.text)
            })
            .collect()
    }

    fn final_slots(&self) -> Option<IndexMap<String, String>> {
        self.is_completed()
            .then(|| self.state.filled_slots().into_iter().collect())
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            state: self.state.clone(),
            stage: self.stage,
            transcript: self.transcript.len(),
            trace: self.trace.len(),
            cycle: self.cycle,
            presentation: self.presentation.clone(),
        }
    }

    fn rollback(&mut self, checkpoint: Checkpoint) {
        self.state = checkpoint.state;
        self.stage = checkpoint.stage;
        self.transcript.truncate(checkpoint.transcript);
        self.trace.truncate(checkpoint.trace);
        self.cycle = checkpoint.cycle;
        self.presentation = checkpoint.presentation;
    }

    /// Feeds one user utterance and runs the loop up to the next input point.
    /// `None` is a protocol error: the engine always waits for input between
    /// calls. On error the session is rolled back to its state before the call.
    pub fn advance(&mut self, input: Option<&str>) -> Result<TurnResult, StrategyError> {
        if self.is_completed() {
            return Err(StrategyError::Completed);
        }
        let input = input.ok_or(StrategyError::InputRequired)?;
        let input = input.trim();
        if input.is_empty() {
            return Err(StrategyError::EmptyInput);
        }
        let checkpoint = self.checkpoint();
        self.cycle += 1;
        self.phase = 0;
        self.moves_since_input = 0;
        self.state.user_utterance_index += 1;
        self.transcript.push(TranscriptEntry {
            speaker: Speaker::User,
            text: input.to_string(),
        });
        let resume = match self.stage {
            Stage::PreferenceInput => Resume::Block1(input.to_string()),
            Stage::MoreConstraintsReply => Resume::Block2Tail(input.to_string()),
            Stage::RejectionReply => Resume::Block3Tail(Some(input.to_string())),
            Stage::Completed => unreachable!("checked above"),
        };
        let mut out = Vec::new();
        match self.run(resume, &mut out) {
            Ok(()) => Ok(self.finish_turn(out)),
            Err(e) => {
                self.rollback(checkpoint);
                Err(e)
            }
        }
    }

    /// Treats the presented table as accepted without a further user turn.
    /// Used when a scripted user runs out of utterances at the rejection
    /// prompt. The closing text is appended to the last TOD entry.
    pub fn accept_presented(&mut self) -> Result<TurnResult, StrategyError> {
        if self.stage != Stage::RejectionReply {
            return Err(StrategyError::NothingPresented);
        }
        let checkpoint = self.checkpoint();
        self.moves_since_input = 0;
        let mut out = Vec::new();
        if let Err(e) = self.run(Resume::Block3Tail(None), &mut out) {
            self.rollback(checkpoint);
            return Err(e);
        }
        let text = out.join("\n");
        if let Some(last) = self
            .transcript
            .iter_mut()
            .rev()
            .find(|e| e.speaker == Speaker::Tod)
        {
            if !text.is_empty() {
                last.text = format!("{}\n{text}", last.text);
            }
        }
        Ok(TurnResult {
            tod_utterance: text,
            awaiting_input: !self.is_completed(),
            completed: self.is_completed(),
            final_slots: self.final_slots(),
        })
    }

    fn finish_turn(&mut self, out: Vec<String>) -> TurnResult {
        let text = out.join("\n");
        self.transcript.push(TranscriptEntry {
            speaker: Speaker::Tod,
            text: text.clone(),
        });
        TurnResult {
            tod_utterance: text,
            awaiting_input: !self.is_completed(),
            completed: self.is_completed(),
            final_slots: self.final_slots(),
        }
    }

    fn record(&mut self, block: u8, dialogue_move: DialogueMove) -> Result<(), StrategyError> {
        self.moves_since_input += 1;
        if self.moves_since_input > MOVE_BUDGET {
            return Err(StrategyError::MoveBudgetExceeded);
        }
        self.phase += 1;
        self.trace.push(TraceEntry {
            cycle: self.cycle,
            phase: self.phase,
            block,
            dialogue_move,
            flags_digest: self.state.flags_digest(),
        });
        Ok(())
    }

    /// Block 1 after the input is known.
    fn block1_body(&mut self, input: &str, out: &mut Vec<String>) -> Result<(), StrategyError> {
        let engine = self.engine.clone();
        self.state.user_is_informed_there_is_no_entity_in_db = TriFlag::Unset;
        let (outcome, _) = moves::update_user_preferences(
            &mut self.state,
            input,
            engine.extractor.as_ref(),
            &self.audit,
        )?;
        self.record(1, DialogueMove::UpdateUserPreferences)?;
        let (wrong, _) =
            moves::check_is_there_wrong_or_out_of_main_value(&mut self.state, &outcome);
        self.record(1, DialogueMove::CheckIsThereWrongOrOutOfMainValue)?;
        self.state.there_is_wrong_or_out_of_domain_value = wrong.into();
        self.state.it_is_required_to_query_database = (!wrong).into();
        self.state.it_is_required_to_update_predefined_slots = TriFlag::Unset;
        if wrong {
            let (text, _) =
                moves::create_clarifying_question_input_is_wrong_or_out_of_domain(&mut self.state)?;
            self.record(1, DialogueMove::ClarifyWrongInput)?;
            out.push(text);
            self.state.it_is_required_to_update_predefined_slots = TriFlag::True;
            if !self.state.user_other_constraints.is_empty() {
                self.state.wrongness_within_other_constraints_checked = TriFlag::True;
            }
        } else {
            self.state.it_is_required_to_update_predefined_slots = TriFlag::Unset;
            self.state.it_is_required_to_query_database = TriFlag::True;
        }
        self.state.there_is_wrong_or_out_of_domain_value = TriFlag::Unset;
        self.state.wrong_or_out_of_domain_values_list.clear();
        Ok(())
    }

    /// Block 2 after the more-constraints reply.
    fn block2_tail(&mut self, reply: &str) -> Result<(), StrategyError> {
        let engine = self.engine.clone();
        let ((has_more, _), _) = moves::classify_more_constraints(
            &mut self.state,
            reply,
            engine.classifier.as_ref(),
            &self.audit,
        )?;
        self.record(2, DialogueMove::CheckMoreConstraints)?;
        self.state.checked_there_is_no_other_constraint = (!has_more).into();
        if has_more {
            self.state.it_is_required_to_update_predefined_slots = TriFlag::True;
            // Set even though the user added constraints; block 3 still waits
            // because the update flag is true.
            self.state.checked_there_is_no_other_constraint = TriFlag::True;
        }
        self.state.query_output_list_is_empty = TriFlag::Unset;
        self.state.it_is_required_to_query_database = TriFlag::Unset;
        Ok(())
    }

    /// Block 3 after the reply to the table (`None`: accepted by default).
    fn block3_tail(
        &mut self,
        reply: Option<&str>,
        out: &mut Vec<String>,
    ) -> Result<(), StrategyError> {
        let engine = self.engine.clone();
        let rejects = match reply {
            Some(reply) => {
                let (rejects, _) = moves::check_if_user_rejects_output(
                    &mut self.state,
                    reply,
                    engine.classifier.as_ref(),
                    &self.audit,
                )?;
                self.record(3, DialogueMove::CheckRejection)?;
                rejects
            }
            None => false,
        };
        if rejects {
            let (text, _) =
                moves::create_clarifying_question_queryoutput_is_empty_output_is_rejected(
                    &mut self.state,
                    engine.retrieval,
                )?;
            self.record(3, DialogueMove::ClarifyEmptyOrRejected)?;
            out.push(text);
            self.state.it_is_required_to_update_predefined_slots = TriFlag::True;
        } else {
            self.state.dialogue_is_completed = TriFlag::True;
        }
        self.state.user_rejects_output = TriFlag::Unset;
        self.state.checked_there_is_no_other_constraint = TriFlag::Unset;
        self.state.user_other_constraints.clear();
        Ok(())
    }

    fn run(&mut self, resume: Resume, out: &mut Vec<String>) -> Result<(), StrategyError> {
        let engine = self.engine.clone();
        let mut resume = Some(resume);
        loop {
            let mut skip_to = 1;
            match resume.take() {
                Some(Resume::Block1(input)) => self.block1_body(&input, out)?,
                Some(Resume::Block2Tail(reply)) => {
                    self.block2_tail(&reply)?;
                    skip_to = 3;
                }
                Some(Resume::Block3Tail(reply)) => {
                    self.block3_tail(reply.as_deref(), out)?;
                    skip_to = 4;
                }
                None => {
                    if self
                        .state
                        .it_is_required_to_update_predefined_slots
                        .is_true()
                    {
                        let consume = !self.state.user_other_constraints.is_empty()
                            && !self
                                .state
                                .wrongness_within_other_constraints_checked
                                .is_true();
                        if consume {
                            let input = self.state.user_other_constraints.clone();
                            out.push(self.state.utterance_to_update_predefined_slot.clone());
                            self.state.wrongness_within_other_constraints_checked = TriFlag::True;
                            self.block1_body(&input, out)?;
                        } else {
                            let prompt = self.state.utterance_to_update_predefined_slot.clone();
                            if out.last() != Some(&prompt) {
                                out.push(prompt);
                            }
                            self.stage = Stage::PreferenceInput;
                            return Ok(());
                        }
                    }
                }
            }

            if skip_to <= 2 && self.state.it_is_required_to_query_database.is_true() {
                let (rows, _) = moves::query_database(&mut self.state)?;
                self.record(2, DialogueMove::QueryDatabase)?;
                let (empty, _) = moves::check_the_emptiness_of_query_output(&mut self.state);
                self.record(2, DialogueMove::CheckEmptiness)?;
                debug_assert_eq!(empty, rows.is_empty());
                if empty {
                    let (text, _) = moves::inform_user_there_is_no_entity_in_db(&mut self.state)?;
                    self.record(2, DialogueMove::InformNoEntity)?;
                    out.push(text);
                    let (text, _) =
                        moves::create_clarifying_question_queryoutput_is_empty_output_is_rejected(
                            &mut self.state,
                            engine.retrieval,
                        )?;
                    self.record(2, DialogueMove::ClarifyEmptyOrRejected)?;
                    out.push(text);
                    self.state.it_is_required_to_update_predefined_slots = TriFlag::True;
                    self.state.query_output_list_is_empty = TriFlag::Unset;
                    self.state.it_is_required_to_query_database = TriFlag::Unset;
                } else {
                    let (text, _) = moves::prompt_more_constraints(&mut self.state);
                    self.record(2, DialogueMove::CheckMoreConstraints)?;
                    out.push(text);
                    self.stage = Stage::MoreConstraintsReply;
                    return Ok(());
                }
            }

            if skip_to <= 3
                && self
                    .state
                    .it_is_required_to_update_predefined_slots
                    .is_unset()
                && self.state.checked_there_is_no_other_constraint.is_true()
            {
                self.state.user_other_constraints.clear();
                let ((entities, table), outcome) =
                    moves::entity_ranking(&mut self.state, engine.ranker.as_ref())?;
                self.record(3, DialogueMove::EntityRanking)?;
                out.push(outcome.tod_utterance.expect("ranking presents a table"));
                self.presentation = Some(Presentation { entities, table });
                self.stage = Stage::RejectionReply;
                return Ok(());
            }

            if self.state.dialogue_is_completed.is_true() {
                let (text, _) = moves::end_dialogue(&mut self.state)?;
                self.record(4, DialogueMove::EndDialogue)?;
                out.push(text);
                self.stage = Stage::Completed;
                return Ok(());
            }

            if !self
                .state
                .it_is_required_to_update_predefined_slots
                .is_true()
            {
                // Nothing left to do and nothing to ask: the flags are
                // inconsistent. Treat as a budget breach rather than spinning.
                return Err(StrategyError::MoveBudgetExceeded);
            }
        }
    }
}

/// Result of feeding a script to a session.
#[derive(Debug, Clone)]
pub struct ScriptRun {
    pub transcript: Vec<TranscriptEntry>,
    pub consumed: usize,
    pub completed: bool,
    pub final_state: InformationState,
}

/// Feeds utterances in order while the session waits for input. A script
/// that runs out while the entity table awaits an answer counts as accepting
/// it.
pub fn run_scripted(
    session: &mut Session,
    utterances: &[String],
) -> Result<ScriptRun, StrategyError> {
    let mut consumed = 0;
    for utterance in utterances {
        if session.is_completed() {
            break;
        }
        session.advance(Some(utterance))?;
        consumed += 1;
    }
    if !session.is_completed() && session.stage() == Stage::RejectionReply {
        session.accept_presented()?;
    }
    Ok(ScriptRun {
        transcript: session.transcript().to_vec(),
        consumed,
        completed: session.is_completed(),
        final_state: session.state().clone(),
    })
}

/// Flag-hygiene and move-order violations of a session, empty when clean.
pub fn check_invariants(session: &Session) -> Vec<String> {
    let mut problems = Vec::new();
    let s = session.state();
    let mut expect = |ok: bool, what: &str| {
        if !ok {
            problems.push(format!("{:?}: {what}", session.stage()));
        }
    };
    // Always reset at the end of block 1.
    expect(
        s.there_is_wrong_or_out_of_domain_value.is_unset(),
        "wrongness flag left set",
    );
    expect(
        s.wrong_or_out_of_domain_values_list.is_empty(),
        "wrong-value list left filled",
    );
    expect(s.user_rejects_output.is_unset(), "rejection flag left set");
    match session.stage() {
        Stage::PreferenceInput => {
            expect(
                s.it_is_required_to_update_predefined_slots.is_true(),
                "update flag not true",
            );
            expect(
                !s.it_is_required_to_query_database.is_true(),
                "query flag true while waiting for preferences",
            );
            expect(
                s.query_output_list_is_empty.is_unset(),
                "emptiness flag left set",
            );
            expect(
                !s.dialogue_is_completed.is_true(),
                "completed while waiting",
            );
        }
        Stage::MoreConstraintsReply => {
            expect(
                s.it_is_required_to_query_database.is_true(),
                "query flag not true",
            );
            expect(
                s.query_output_list_is_empty == TriFlag::False,
                "output not marked non-empty",
            );
            expect(!s.db_query_output_list.is_empty(), "no query output");
        }
        Stage::RejectionReply => {
            expect(
                s.it_is_required_to_update_predefined_slots.is_unset(),
                "update flag not unset",
            );
            expect(
                s.checked_there_is_no_other_constraint.is_true(),
                "constraints not checked",
            );
            expect(
                s.user_is_informed_of_db_output.is_true(),
                "output not presented",
            );
            expect(
                s.user_other_constraints.is_empty(),
                "other constraints not cleared",
            );
        }
        Stage::Completed => {
            expect(s.dialogue_is_completed.is_true(), "completed flag not set");
            expect(
                s.checked_there_is_no_other_constraint.is_unset(),
                "checked flag left set",
            );
        }
    }

    // Move order over the whole trace.
    let trace = session.trace();
    for pair in trace.windows(2) {
        if pair[0].cycle == pair[1].cycle && pair[1].phase <= pair[0].phase {
            problems.push(format!("phases not increasing in cycle {}", pair[0].cycle));
        }
    }
    for (i, entry) in trace.iter().enumerate() {
        match entry.dialogue_move {
            DialogueMove::QueryDatabase => {
                let prev = i.checked_sub(1).map(|j| trace[j].dialogue_move);
                if prev != Some(DialogueMove::CheckIsThereWrongOrOutOfMainValue) {
                    problems.push(format!(
                        "query at {i} not preceded by a clean wrongness check"
                    ));
                }
            }
            DialogueMove::EntityRanking => {
                let prev = i.checked_sub(1).map(|j| trace[j].dialogue_move);
                if prev != Some(DialogueMove::CheckMoreConstraints) {
                    problems.push(format!(
                        "ranking at {i} not preceded by the constraints check"
                    ));
                }
            }
            _ => {}
        }
    }
    let ends = trace
        .iter()
        .filter(|t| t.dialogue_move == DialogueMove::EndDialogue)
        .count();
    if session.is_completed() && ends != 1 {
        problems.push(format!("end_dialogue ran {ends} times"));
    }
    if !session.is_completed() && ends != 0 {
        problems.push("end_dialogue ran in an open session".into());
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn session(dict: Arc<DomainDictionary>) -> Session {
        Session::new("t", dict, Engine::rule_based())
    }

    fn moves_of(session: &Session, cycle: usize) -> Vec<&'static str> {
        session
            .trace()
            .iter()
            .filter(|t| t.cycle == cycle)
            .map(|t| t.dialogue_move.name())
            .collect()
    }

    #[test]
    fn first_turn_asks_for_more_constraints() {
        let mut s = session(fixtures::restaurant());
        assert_eq!(s.start().tod_utterance, "enter query");
        let r = s
            .advance(Some(
                "Hello. Can you suggest a French restaurant in the north end?",
            ))
            .unwrap();
        assert!(r.awaiting_input);
        assert!(r.tod_utterance.contains("other constraints"));
        assert_eq!(
            moves_of(&s, 1),
            vec![
                "update_user_preferences",
                "check_is_there_wrong_or_out_of_main_value",
                "query_database",
                "check_the_emptiness_of_query_output",
                "check_if_the_user_wants_to_enter_more_constraints",
            ]
        );
        assert!(check_invariants(&s).is_empty());
    }

    #[test]
    fn wrong_value_gets_clarified() {
        let mut s = session(fixtures::restaurant());
        let r = s
            .advance(Some(
                "I am looking for a restaurant that serves canap in the east.",
            ))
            .unwrap();
        assert!(r.awaiting_input && r.tod_utterance.contains("canap"));
        assert_eq!(
            s.state().it_is_required_to_update_predefined_slots,
            TriFlag::True
        );
        assert_eq!(s.stage(), Stage::PreferenceInput);
        assert!(
            check_invariants(&s).is_empty(),
            "{:?}",
            check_invariants(&s)
        );
    }

    #[test]
    fn closing_reply_presents_table_then_completes() {
        let mut s = session(fixtures::restaurant());
        s.advance(Some("a french restaurant in the north")).unwrap();
        let r = s.advance(Some("That's all I need")).unwrap();
        assert!(r.tod_utterance.contains("two two"));
        assert_eq!(s.stage(), Stage::RejectionReply);
        let r = s.advance(Some("Great, I'll take it.")).unwrap();
        assert!(r.completed && !r.awaiting_input);
        let slots = r.final_slots.unwrap();
        assert_eq!(slots.get("area").map(String::as_str), Some("north"));
        assert!(check_invariants(&s).is_empty());
        assert!(matches!(
            s.advance(Some("hi")),
            Err(StrategyError::Completed)
        ));
    }

    #[test]
    fn rejection_leads_to_suggestions() {
        let mut s = session(fixtures::restaurant());
        s.advance(Some("a french restaurant in the north")).unwrap();
        s.advance(Some("no thanks")).unwrap();
        let r = s
            .advance(Some("None of these, show me something else."))
            .unwrap();
        assert!(r.awaiting_input);
        assert_eq!(s.stage(), Stage::PreferenceInput);
        assert!(
            check_invariants(&s).is_empty(),
            "{:?}",
            check_invariants(&s)
        );
    }

    #[test]
    fn empty_query_informs_and_clarifies() {
        let mut s = session(fixtures::italian_gap_restaurants());
        let r = s
            .advance(Some("italian food in the moderate price range"))
            .unwrap();
        assert!(r.tod_utterance.contains("Sorry, there is no restaurant"));
        assert!(r.tod_utterance.contains("pricerange: cheap, food: italian"));
        assert_eq!(s.stage(), Stage::PreferenceInput);
        assert!(
            check_invariants(&s).is_empty(),
            "{:?}",
            check_invariants(&s)
        );
    }

    #[test]
    fn other_constraints_are_consumed_once() {
        let mut s = session(fixtures::italian_gap_restaurants());
        s.advance(Some("I want italian food")).unwrap();
        // Adds a constraint that empties the query: the engine must ask
        // instead of re-consuming the same constraints forever.
        let r = s
            .advance(Some("in the moderate price range please"))
            .unwrap();
        assert!(r
            .tod_utterance
            .starts_with("Updating your preferences with"));
        assert!(r.tod_utterance.contains("Sorry"));
        assert_eq!(s.stage(), Stage::PreferenceInput);
        let r = s.advance(Some("cheap then")).unwrap();
        assert!(r.tod_utterance.contains("other constraints"));
        assert!(
            check_invariants(&s).is_empty(),
            "{:?}",
            check_invariants(&s)
        );
    }

    #[test]
    fn errors_roll_back() {
        let mut s = session(fixtures::restaurant());
        assert!(matches!(s.advance(None), Err(StrategyError::InputRequired)));
        assert!(matches!(
            s.advance(Some("  ")),
            Err(StrategyError::EmptyInput)
        ));
        assert_eq!(s.transcript().len(), 1);
        assert_eq!(s.state().user_utterance_index, 0);
    }

    #[test]
    fn script_exhaustion_without_table() {
        let mut s = session(fixtures::restaurant());
        let run = run_scripted(&mut s, &["cheap food".to_string()]).unwrap();
        assert!(!run.completed);
        assert_eq!(run.consumed, 1);
    }
}
