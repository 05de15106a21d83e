use rand::seq::SliceRandom;
use rand::Rng;

use super::{DslError, HomProgram, NodeId};

/// `rows × n` matrix-vector product: one `Mul` per row followed by an
/// inner sum of `log2 n` rotate-and-add steps.
pub fn build_matvec(rows: usize, n: usize, level: usize) -> Result<HomProgram, DslError> {
    let mut p = HomProgram::new(n)?;
    let m_rows = (0..rows).map(|_| p.input(level)).collect::<Result<Vec<_>, _>>()?;
    let v = p.input(level)?;
    for &row in &m_rows {
        let mut x = p.mul(row, v)?;
        for i in 0..n.trailing_zeros() {
            let r = p.rotate(x, 1 << i)?;
            x = p.add(x, r)?;
        }
        p.output(x)?;
    }
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct RandomProgramConfig {
    pub n: usize,
    pub level: usize,
    /// Cap on multiplicative depth.
    pub depth: usize,
    pub inputs: usize,
    pub ops: usize,
    pub add_plain: bool,
}

impl RandomProgramConfig {
    pub fn new(n: usize, level: usize, depth: usize) -> Self {
        Self {
            n,
            level,
            depth,
            inputs: 3,
            ops: 12,
            add_plain: false,
        }
    }
}

/// Straight-line program of `Add`, `Mul` and power-of-two `Rotate`s whose
/// multiplicative depth stays within `cfg.depth`. Every sink is an output.
pub fn random_program(cfg: &RandomProgramConfig, rng: &mut impl Rng) -> Result<HomProgram, DslError> {
    let mut p = HomProgram::new(cfg.n)?;
    // (node, multiplicative depth)
    let mut pool: Vec<(NodeId, usize)> = Vec::new();
    for _ in 0..cfg.inputs.max(1) {
        pool.push((p.input(cfg.level)?, 0));
    }
    let log_n = cfg.n.trailing_zeros();
    for _ in 0..cfg.ops {
        let &(a, da) = pool.choose(rng).expect("non-empty pool");
        let &(b, db) = pool.choose(rng).expect("non-empty pool");
        let choice = rng.gen_range(0..if cfg.add_plain { 4 } else { 3 });
        let d = da.max(db);
        let min_level = p.node(a).level.min(p.node(b).level);
        let node = match choice {
            1 if d < cfg.depth && min_level >= 2 => (p.mul(a, b)?, d + 1),
            2 => (p.rotate(a, 1 << rng.gen_range(0..log_n))?, da),
            3 => {
                let pt = p.plain_input(cfg.level)?;
                (p.add_plain(a, pt)?, da)
            }
            _ => (p.add(a, b)?, d),
        };
        pool.push(node);
    }
    let users = p.users();
    let sinks: Vec<NodeId> = pool
        .iter()
        .map(|&(id, _)| id)
        .filter(|&id| users[id].is_empty() && !p.node(id).kind.is_input())
        .collect();
    for id in sinks {
        p.output(id)?;
    }
    if p.outputs().is_empty() {
        let last = pool.last().expect("non-empty").0;
        p.output(last)?;
    }
    Ok(p)
}
