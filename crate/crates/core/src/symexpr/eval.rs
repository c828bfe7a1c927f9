use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::Expr;
use crate::u256::U256;

/// Total map from symbol names to concrete values.
pub type Assignment = BTreeMap<String, U256>;

/// Deterministic hash used to give `SHA3` a concrete meaning.
///
/// The reasoner only relies on injectivity, so any fixed cryptographic hash
/// serves; the default is SHA-256.
#[derive(Clone, Copy)]
pub struct HashOracle(pub fn(&[u8]) -> [u8; 32]);

impl HashOracle {
    pub fn sha256() -> Self {
        HashOracle(|bytes| Sha256::digest(bytes).into())
    }

    pub fn hash(&self, bytes: &[u8]) -> U256 {
        U256::from_be_bytes((self.0)(bytes))
    }
}

impl Default for HashOracle {
    fn default() -> Self {
        Self::sha256()
    }
}

impl std::fmt::Debug for HashOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("HashOracle")
    }
}

const CONCAT_DOMAIN_TAG: u8 = 0xff;

/// Evaluates `e` under `assignment`; `None` if a symbol is unassigned.
///
/// `SHA3(x)` hashes the byte image of `x`: each non-concatenation leaf is its
/// 32-byte big-endian value, and `CONCAT` joins images. A bare `CONCAT` (not
/// under `SHA3`) evaluates to the hash of its image in a separate domain.
pub fn eval_concrete(e: &Expr, assignment: &Assignment, oracle: &HashOracle) -> Option<U256> {
    Some(match e {
        Expr::Const(c) => *c,
        Expr::Sym(s) => *assignment.get(s.name())?,
        Expr::Bin(op, a, b) => op.apply(eval_concrete(a, assignment, oracle)?, eval_concrete(b, assignment, oracle)?),
        Expr::Not(a) => U256::from_bool(eval_concrete(a, assignment, oracle)?.is_zero()),
        Expr::Sha3(a) => {
            let mut bytes = Vec::new();
            image(a, assignment, oracle, &mut bytes)?;
            oracle.hash(&bytes)
        }
        Expr::Concat(..) => {
            let mut bytes = vec![CONCAT_DOMAIN_TAG];
            image(e, assignment, oracle, &mut bytes)?;
            oracle.hash(&bytes)
        }
    })
}

fn image(e: &Expr, assignment: &Assignment, oracle: &HashOracle, out: &mut Vec<u8>) -> Option<()> {
    match e {
        Expr::Concat(a, b) => {
            image(a, assignment, oracle, out)?;
            image(b, assignment, oracle, out)
        }
        other => {
            out.extend_from_slice(&eval_concrete(other, assignment, oracle)?.to_be_bytes());
            Some(())
        }
    }
}
