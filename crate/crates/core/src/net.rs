//! The growing question network: items are nodes, binary questions are edges.
//!
//! Questions form a simple undirected graph. Each question carries an
//! [`AnswerTally`] and the clock value at which it was created; the clock
//! counts recorded answers, so after `t` answers the net is at time `t`.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("question would join item {0} to itself")]
    SelfLoop(ItemId),
    #[error("question ({0}, {1}) already exists")]
    DuplicateQuestion(ItemId, ItemId),
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("unknown question {0}")]
    UnknownQuestion(QuestionKey),
    #[error("question {0} has no '{1}' answer to retract")]
    NothingToRetract(QuestionKey, Answer),
    #[error("the net has no questions")]
    EmptyNet,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] IoErrorKind),
}

/// `std::io::Error` is not `Clone`/`Eq`; keep its kind and message.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind:?}: {msg}")]
pub struct IoErrorKind {
    pub kind: std::io::ErrorKind,
    pub msg: String,
}

impl From<std::io::Error> for NetError {
    fn from(e: std::io::Error) -> Self {
        NetError::Io(IoErrorKind {
            kind: e.kind(),
            msg: e.to_string(),
        })
    }
}

/// Item identifier, assigned sequentially from 0 in creation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemId(pub u32);

impl ItemId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Position of a question in creation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QuestionKey(pub u32);

impl QuestionKey {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for QuestionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Answer {
    Yes,
    No,
}

impl Answer {
    pub fn from_bool(yes: bool) -> Self {
        if yes {
            Answer::Yes
        } else {
            Answer::No
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "yes",
            Answer::No => "no",
        })
    }
}

/// Counts of binary answers to one question.
///
/// The tally doubles as a Beta posterior under a uniform prior:
/// `alpha = n_yes + 1`, `beta = n_no + 1`. Multiple-choice questions would
/// replace the two counters with one per category; only the binary case is
/// supported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnswerTally {
    pub n_yes: u64,
    pub n_no: u64,
}

impl AnswerTally {
    pub fn new(n_yes: u64, n_no: u64) -> Self {
        Self { n_yes, n_no }
    }

    pub fn total(&self) -> u64 {
        self.n_yes + self.n_no
    }

    pub fn alpha(&self) -> u64 {
        self.n_yes + 1
    }

    pub fn beta(&self) -> u64 {
        self.n_no + 1
    }

    /// Laplace-smoothed fraction of 'yes' answers, `(n_yes + 1) / (N + 2)`.
    pub fn smoothed_yes<T: Scalar>(&self) -> T {
        T::of_count(self.alpha()) / T::of_count(self.total() + 2)
    }

    pub fn record(&mut self, answer: Answer) {
        match answer {
            Answer::Yes => self.n_yes += 1,
            Answer::No => self.n_no += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    /// Endpoints, stored with the smaller id first.
    pub endpoints: (ItemId, ItemId),
    pub tally: AnswerTally,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ItemRecord {
    created_at: u64,
    degree: u32,
}

/// A growing network of items and questions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuestionNet {
    items: Vec<ItemRecord>,
    // Creation order; `QuestionKey` indexes this vector.
    questions: Vec<Question>,
    by_pair: HashMap<(ItemId, ItemId), QuestionKey>,
    clock: u64,
}

fn ordered(u: ItemId, v: ItemId) -> (ItemId, ItemId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

impl QuestionNet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Two items joined by a single question, at time 0.
    pub fn seeded() -> Self {
        let mut net = Self::new();
        let a = net.add_item();
        let b = net.add_item();
        net.add_question(a, b).expect("fresh items form a valid question");
        net
    }

    pub fn add_item(&mut self) -> ItemId {
        let id = ItemId(u32::try_from(self.items.len()).expect("item count fits in u32"));
        self.items.push(ItemRecord {
            created_at: self.clock,
            degree: 0,
        });
        id
    }

    pub fn add_question(&mut self, u: ItemId, v: ItemId) -> Result<QuestionKey, NetError> {
        if u == v {
            return Err(NetError::SelfLoop(u));
        }
        for i in [u, v] {
            if !self.contains_item(i) {
                return Err(NetError::UnknownItem(i));
            }
        }
        let pair = ordered(u, v);
        if self.by_pair.contains_key(&pair) {
            return Err(NetError::DuplicateQuestion(pair.0, pair.1));
        }
        let key = QuestionKey(u32::try_from(self.questions.len()).expect("question count fits in u32"));
        self.questions.push(Question {
            endpoints: pair,
            tally: AnswerTally::default(),
            created_at: self.clock,
        });
        self.by_pair.insert(pair, key);
        self.items[u.index()].degree += 1;
        self.items[v.index()].degree += 1;
        Ok(key)
    }

    /// Records one answer and advances the clock.
    pub fn record_answer(&mut self, key: QuestionKey, answer: Answer) -> Result<AnswerTally, NetError> {
        let q = self
            .questions
            .get_mut(key.index())
            .ok_or(NetError::UnknownQuestion(key))?;
        q.tally.record(answer);
        self.clock += 1;
        Ok(q.tally)
    }

    /// Inverse of [`record_answer`](Self::record_answer): removes one answer and moves the clock back.
    pub fn retract_answer(&mut self, key: QuestionKey, answer: Answer) -> Result<AnswerTally, NetError> {
        let q = self
            .questions
            .get_mut(key.index())
            .ok_or(NetError::UnknownQuestion(key))?;
        let count = match answer {
            Answer::Yes => &mut q.tally.n_yes,
            Answer::No => &mut q.tally.n_no,
        };
        if *count == 0 {
            return Err(NetError::NothingToRetract(key, answer));
        }
        *count -= 1;
        self.clock -= 1;
        Ok(q.tally)
    }

    pub fn degree(&self, i: ItemId) -> Result<u32, NetError> {
        self.items
            .get(i.index())
            .map(|r| r.degree)
            .ok_or(NetError::UnknownItem(i))
    }

    pub fn item_created_at(&self, i: ItemId) -> Result<u64, NetError> {
        self.items
            .get(i.index())
            .map(|r| r.created_at)
            .ok_or(NetError::UnknownItem(i))
    }

    pub fn contains_item(&self, i: ItemId) -> bool {
        i.index() < self.items.len()
    }

    pub fn question(&self, key: QuestionKey) -> Result<&Question, NetError> {
        self.questions.get(key.index()).ok_or(NetError::UnknownQuestion(key))
    }

    pub fn find(&self, u: ItemId, v: ItemId) -> Option<QuestionKey> {
        self.by_pair.get(&ordered(u, v)).copied()
    }

    /// Number of items, `|V|`.
    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    /// Number of questions, `M = |E|`.
    pub fn question_count(&self) -> usize {
        self.questions.len()
    }

    /// Answers recorded so far.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn items(&self) -> impl ExactSizeIterator<Item = ItemId> + '_ {
        (0..self.items.len()).map(|i| ItemId(i as u32))
    }

    /// Questions in creation order.
    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn keys(&self) -> impl ExactSizeIterator<Item = QuestionKey> + '_ {
        (0..self.questions.len()).map(|i| QuestionKey(i as u32))
    }

    pub fn degrees(&self) -> impl ExactSizeIterator<Item = u32> + '_ {
        self.items.iter().map(|r| r.degree)
    }

    /// Writes the `# qnet v1` edge-list format.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), NetError> {
        writeln!(w, "# qnet v1")?;
        for q in &self.questions {
            writeln!(
                w,
                "{} {} {} {} {}",
                q.endpoints.0, q.endpoints.1, q.tally.n_yes, q.tally.n_no, q.created_at
            )?;
        }
        let isolated: Vec<String> = self
            .items()
            .filter(|&i| self.items[i.index()].degree == 0)
            .map(|i| i.to_string())
            .collect();
        if !isolated.is_empty() {
            writeln!(w, "# isolated: {}", isolated.join(","))?;
        }
        Ok(())
    }

    /// Reads the `# qnet v1` edge-list format.
    ///
    /// Item ids must be dense (`0..|V|`) once the isolated trailer is taken
    /// into account. Item creation times are not stored by the format; each
    /// item is stamped with the creation time of its first question (0 for
    /// isolated items). The clock is the sum of all tallies.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self, NetError> {
        let mut rows = Vec::new();
        let mut isolated = Vec::new();
        let mut saw_header = false;
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                let comment = comment.trim();
                if comment == "qnet v1" {
                    saw_header = true;
                } else if let Some(list) = comment.strip_prefix("isolated:") {
                    for tok in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        isolated.push(parse_field::<u32>(tok, line_no, "isolated item")?);
                    }
                }
                continue;
            }
            if !saw_header {
                return Err(NetError::Parse {
                    line: line_no,
                    msg: "missing '# qnet v1' header".into(),
                });
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(NetError::Parse {
                    line: line_no,
                    msg: format!("expected 5 fields 'u v n_yes n_no created_at', got {}", fields.len()),
                });
            }
            rows.push((
                line_no,
                parse_field::<u32>(fields[0], line_no, "u")?,
                parse_field::<u32>(fields[1], line_no, "v")?,
                parse_field::<u64>(fields[2], line_no, "n_yes")?,
                parse_field::<u64>(fields[3], line_no, "n_no")?,
                parse_field::<u64>(fields[4], line_no, "created_at")?,
            ));
        }
        if !saw_header {
            return Err(NetError::Parse {
                line: 0,
                msg: "missing '# qnet v1' header".into(),
            });
        }

        let max_id = rows
            .iter()
            .flat_map(|r| [r.1, r.2])
            .chain(isolated.iter().copied())
            .max();
        let n_items = max_id.map_or(0, |m| m as usize + 1);
        let mut first_seen: Vec<Option<u64>> = vec![None; n_items];
        for &(_, u, v, _, _, created) in &rows {
            for i in [u, v] {
                let slot = &mut first_seen[i as usize];
                *slot = Some(slot.map_or(created, |c| c.min(created)));
            }
        }
        for &i in &isolated {
            first_seen[i as usize].get_or_insert(0);
        }
        if let Some(gap) = first_seen.iter().position(Option::is_none) {
            return Err(NetError::Parse {
                line: 0,
                msg: format!("item {gap} is neither an endpoint nor listed as isolated"),
            });
        }

        let mut net = QuestionNet::new();
        net.items = first_seen
            .into_iter()
            .map(|c| ItemRecord {
                created_at: c.unwrap_or(0),
                degree: 0,
            })
            .collect();
        let mut last_created = 0;
        for (line_no, u, v, n_yes, n_no, created) in rows {
            if created < last_created {
                return Err(NetError::Parse {
                    line: line_no,
                    msg: "questions must be listed in creation order".into(),
                });
            }
            last_created = created;
            let key = net.add_question(ItemId(u), ItemId(v)).map_err(|e| NetError::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
            let q = &mut net.questions[key.index()];
            q.tally = AnswerTally::new(n_yes, n_no);
            q.created_at = created;
            net.clock += n_yes + n_no;
        }
        Ok(net)
    }
}

fn parse_field<F: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<F, NetError> {
    tok.parse().map_err(|_| NetError::Parse {
        line,
        msg: format!("invalid {what} '{tok}'"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn add_item_assigns_sequential_ids() {
        let mut net = QuestionNet::new();
        assert_eq!(net.add_item(), ItemId(0));
        assert_eq!(net.item_count(), 1);
        net.add_item();
        assert_eq!(net.add_item(), ItemId(2));
        assert_eq!(net.item_count(), 3);
    }

    #[test]
    fn seed_net_has_one_question() {
        let net = QuestionNet::seeded();
        assert_eq!(net.question_count(), 1);
        assert_eq!(net.degree(ItemId(0)), Ok(1));
        assert_eq!(net.degree(ItemId(1)), Ok(1));
    }

    #[test]
    fn add_question_rejects_duplicates_self_loops_and_unknown_items() {
        let mut net = QuestionNet::seeded();
        assert_eq!(
            net.add_question(ItemId(1), ItemId(0)),
            Err(NetError::DuplicateQuestion(ItemId(0), ItemId(1)))
        );
        assert_eq!(
            net.add_question(ItemId(0), ItemId(0)),
            Err(NetError::SelfLoop(ItemId(0)))
        );
        assert_eq!(
            net.add_question(ItemId(0), ItemId(7)),
            Err(NetError::UnknownItem(ItemId(7)))
        );
    }

    #[test]
    fn record_answer_updates_tally_and_clock() {
        let mut net = QuestionNet::seeded();
        let q = QuestionKey(0);
        let t = net.record_answer(q, Answer::Yes).unwrap();
        assert_eq!(t, AnswerTally::new(1, 0));
        assert_eq!((t.alpha(), t.beta()), (2, 1));
        assert_eq!(net.clock(), 1);
        assert_eq!(
            net.record_answer(QuestionKey(3), Answer::No),
            Err(NetError::UnknownQuestion(QuestionKey(3)))
        );
    }

    #[test]
    fn smoothed_proportion_after_even_split() {
        let mut tally = AnswerTally::new(3, 2);
        tally.record(Answer::No);
        assert_eq!(tally, AnswerTally::new(3, 3));
        assert_eq!(tally.smoothed_yes::<f64>(), 0.5);
    }

    #[test]
    fn retract_undoes_record() {
        let mut net = QuestionNet::seeded();
        net.record_answer(QuestionKey(0), Answer::No).unwrap();
        net.retract_answer(QuestionKey(0), Answer::No).unwrap();
        assert_eq!(net, QuestionNet::seeded());
        assert!(net.retract_answer(QuestionKey(0), Answer::Yes).is_err());
    }

    #[test]
    fn degree_of_star_center_and_isolated_item() {
        let mut net = QuestionNet::new();
        let c = net.add_item();
        for _ in 0..3 {
            let leaf = net.add_item();
            net.add_question(c, leaf).unwrap();
        }
        assert_eq!(net.degree(c), Ok(3));
        let lonely = net.add_item();
        assert_eq!(net.degree(lonely), Ok(0));
        assert_eq!(net.degree(ItemId(99)), Err(NetError::UnknownItem(ItemId(99))));
    }

    #[test]
    fn edge_list_round_trip_keeps_isolated_items() {
        let mut net = QuestionNet::seeded();
        net.record_answer(QuestionKey(0), Answer::Yes).unwrap();
        let w = net.add_item();
        net.add_question(ItemId(1), w).unwrap();
        net.record_answer(QuestionKey(1), Answer::No).unwrap();
        net.add_item();

        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# qnet v1\n0 1 1 0 0\n1 2 0 1 1\n# isolated: 3\n");

        let back = QuestionNet::read_from(text.as_bytes()).unwrap();
        assert_eq!(back.question_count(), 2);
        assert_eq!(back.item_count(), 4);
        assert_eq!(back.clock(), 2);
        assert_eq!(back.questions(), net.questions());
    }

    #[test]
    fn read_rejects_missing_header_and_bad_fields() {
        assert!(matches!(
            QuestionNet::read_from("0 1 0 0 0\n".as_bytes()),
            Err(NetError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            QuestionNet::read_from("# qnet v1\n0 1 x 0 0\n".as_bytes()),
            Err(NetError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            QuestionNet::read_from("# qnet v1\n0 0 0 0 0\n".as_bytes()),
            Err(NetError::Parse { line: 2, .. })
        ));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Item,
        Question(u32, u32),
        Answer(u32, bool),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            Just(Op::Item),
            (0u32..20, 0u32..20).prop_map(|(u, v)| Op::Question(u, v)),
            (0u32..40, any::<bool>()).prop_map(|(q, y)| Op::Answer(q, y)),
        ]
    }

    proptest! {
        #[test]
        fn mutations_preserve_net_invariants(ops in prop::collection::vec(op(), 0..200)) {
            let mut net = QuestionNet::seeded();
            for op in ops {
                // Invalid mutations are rejected without side effects.
                let _ = match op {
                    Op::Item => { net.add_item(); Ok(()) }
                    Op::Question(u, v) => net.add_question(ItemId(u), ItemId(v)).map(|_| ()),
                    Op::Answer(q, y) => net.record_answer(QuestionKey(q), Answer::from_bool(y)).map(|_| ()),
                };
            }
            let answers: u64 = net.questions().iter().map(|q| q.tally.total()).sum();
            prop_assert_eq!(answers, net.clock());
            let degree_sum: u64 = net.degrees().map(u64::from).sum();
            prop_assert_eq!(degree_sum, 2 * net.question_count() as u64);
            prop_assert!(net.questions().windows(2).all(|w| w[0].created_at <= w[1].created_at));
            for q in net.questions() {
                prop_assert!(q.endpoints.0 < q.endpoints.1);
                prop_assert!(net.contains_item(q.endpoints.1));
                let t = q.tally;
                prop_assert_eq!(t.alpha() + t.beta(), t.total() + 2);
                let p: f64 = t.smoothed_yes();
                prop_assert!((p * (t.total() + 2) as f64 - t.alpha() as f64).abs() < 1e-9);
                prop_assert!(p > 0.0 && p < 1.0);
            }
        }
    }
}
