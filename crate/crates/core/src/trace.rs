//! Line-delimited JSON trace records: one self-contained object per line.
//!
//! Amounts are decimal strings (they are unbounded); payloads use the
//! canonical payload text. See `docs/trace-format.md`.

use std::io::{self, BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::chain::{BlockErrorKind, ChainState, Event, ExecOrder};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceRecord {
    Deployed {
        block: usize,
        order: ExecOrder,
        seq: usize,
        at: String,
        by: String,
        amount: String,
        code: String,
        setup: String,
    },
    Tx {
        block: usize,
        order: ExecOrder,
        seq: usize,
        from: String,
        to: String,
        amount: String,
        /// `None` for plain transfers.
        payload: Option<String>,
    },
    Rejected {
        block: usize,
        order: ExecOrder,
        /// Root action that failed; `None` for a malformed root list.
        root: Option<usize>,
        step: Option<usize>,
        reason: String,
    },
}

impl TraceRecord {
    pub fn from_event(block: usize, order: ExecOrder, seq: usize, e: &Event) -> Self {
        match e {
            Event::Deployed(d) => TraceRecord::Deployed {
                block,
                order,
                seq,
                at: d.at.to_string(),
                by: d.by.to_string(),
                amount: d.amount.to_string(),
                code: d.code.clone(),
                setup: d.setup.to_string(),
            },
            Event::Tx(tx) => TraceRecord::Tx {
                block,
                order,
                seq,
                from: tx.from.to_string(),
                to: tx.to.to_string(),
                amount: tx.amount.to_string(),
                payload: tx.payload.as_ref().map(ToString::to_string),
            },
        }
    }

    pub fn rejected(block: usize, order: ExecOrder, kind: &BlockErrorKind) -> Self {
        let (root, step) = match kind {
            BlockErrorKind::ActionFailed { root, step, .. } => (Some(*root), Some(*step)),
            BlockErrorKind::InvalidRoot { index } => (Some(*index), None),
        };
        TraceRecord::Rejected {
            block,
            order,
            root,
            step,
            reason: kind.to_string(),
        }
    }
}

/// Records for one block: the log events in `span` if it committed into
/// `state`, or a single rejection.
pub fn block_records(
    block: usize,
    order: ExecOrder,
    state: &ChainState,
    span: Range<usize>,
    outcome: Result<(), &BlockErrorKind>,
) -> Vec<TraceRecord> {
    match outcome {
        Ok(()) => {
            let first = span.start;
            state.log()[span]
                .iter()
                .enumerate()
                .map(|(i, e)| TraceRecord::from_event(block, order, first + i, e))
                .collect()
        }
        Err(kind) => vec![TraceRecord::rejected(block, order, kind)],
    }
}

pub fn write_jsonl<'a>(out: &mut impl Write, records: impl IntoIterator<Item = &'a TraceRecord>) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(input: impl BufRead) -> io::Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}
