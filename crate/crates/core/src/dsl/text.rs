//! Node-per-line text form of a [`HomProgram`].
//!
//! ```text
//! program n=64
//! 0 input - L4 -
//! 1 mod_switch 0 L3 -
//! 2 mul 1,1 L3 relin@3
//! 3 rotate:1 2 L3 galois5@3
//! output 3
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use super::{galois_for_rotation, DslError, HintId, HomOpKind, HomOpNode, HomProgram};
use crate::bgv::HintTarget;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `program n=...` header")]
    MissingHeader,
    #[error(transparent)]
    Invalid(#[from] DslError),
}

pub fn emit_program(p: &HomProgram) -> String {
    let mut s = format!("program n={}\n", p.n());
    for node in p.nodes() {
        let kind = match node.kind {
            HomOpKind::Rotate { amount, .. } => format!("rotate:{amount}"),
            k => k.name().to_string(),
        };
        let ops = if node.operands.is_empty() {
            "-".to_string()
        } else {
            node.operands
                .iter()
                .map(|o| o.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let hint = node.hint.map_or("-".to_string(), |h| h.to_string());
        writeln!(s, "{} {} {} L{} {}", node.id, kind, ops, node.level, hint).expect("write to String");
    }
    for o in p.outputs() {
        writeln!(s, "output {o}").expect("write to String");
    }
    s
}

fn parse_hint(tok: &str) -> Option<Option<HintId>> {
    if tok == "-" {
        return Some(None);
    }
    let (target, level) = tok.split_once('@')?;
    let level = level.parse().ok()?;
    let target = if target == "relin" {
        HintTarget::Relinearize
    } else {
        HintTarget::Automorphism(target.strip_prefix("galois")?.parse().ok()?)
    };
    Some(Some(HintId { target, level }))
}

fn arity(kind: HomOpKind) -> usize {
    match kind {
        HomOpKind::Input | HomOpKind::PlainInput => 0,
        HomOpKind::Rotate { .. } | HomOpKind::ModSwitch => 1,
        _ => 2,
    }
}

pub fn parse_program(text: &str) -> Result<HomProgram, ParseError> {
    let mut n = None;
    let mut nodes = Vec::new();
    let mut outputs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |msg: &str| ParseError::Syntax {
            line,
            msg: msg.to_string(),
        };
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks[0] {
            "program" => {
                let v = toks
                    .get(1)
                    .and_then(|t| t.strip_prefix("n="))
                    .and_then(|v| v.parse::<usize>().ok())
                    .ok_or_else(|| err("expected `program n=<N>`"))?;
                n = Some(v);
            }
            "output" => {
                let id = toks
                    .get(1)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err("expected `output <id>`"))?;
                outputs.push(id);
            }
            _ => {
                let n = n.ok_or(ParseError::MissingHeader)?;
                if toks.len() != 5 {
                    return Err(err("expected `<id> <kind> <operands> L<level> <hint>`"));
                }
                let id: usize = toks[0].parse().map_err(|_| err("bad node id"))?;
                let kind = match toks[1] {
                    "input" => HomOpKind::Input,
                    "plain_input" => HomOpKind::PlainInput,
                    "add" => HomOpKind::Add,
                    "mul" => HomOpKind::Mul,
                    "mod_switch" => HomOpKind::ModSwitch,
                    "add_plain" => HomOpKind::AddPlain,
                    "mul_plain" => HomOpKind::MulPlain,
                    k => {
                        let amount: u64 = k
                            .strip_prefix("rotate:")
                            .and_then(|a| a.parse().ok())
                            .ok_or_else(|| err("unknown node kind"))?;
                        HomOpKind::Rotate {
                            amount,
                            k: galois_for_rotation(amount, n),
                        }
                    }
                };
                let operands = if toks[2] == "-" {
                    Vec::new()
                } else {
                    toks[2]
                        .split(',')
                        .map(|o| o.parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| err("bad operand list"))?
                };
                if operands.len() != arity(kind) {
                    return Err(err("wrong operand count"));
                }
                let level = toks[3]
                    .strip_prefix('L')
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| err("bad level"))?;
                let hint = parse_hint(toks[4]).ok_or_else(|| err("bad hint"))?;
                let expected_hint = match kind {
                    HomOpKind::Mul => Some(HintId {
                        target: HintTarget::Relinearize,
                        level,
                    }),
                    HomOpKind::Rotate { k, .. } => Some(HintId {
                        target: HintTarget::Automorphism(k),
                        level,
                    }),
                    _ => None,
                };
                if hint != expected_hint {
                    return Err(err("hint does not match node"));
                }
                nodes.push(HomOpNode {
                    id,
                    kind,
                    operands,
                    level,
                    hint,
                });
            }
        }
    }
    let n = n.ok_or(ParseError::MissingHeader)?;
    Ok(HomProgram::from_parts(n, nodes, outputs)?)
}
