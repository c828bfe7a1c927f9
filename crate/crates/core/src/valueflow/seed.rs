use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::AnalysisConfig;
use crate::ir::{harvest_constants, Contract, Function, HarvestedConstants, Var, ValueType};
use crate::symexpr::Expr;
use crate::u256::U256;

const SMALL_LIMIT: u64 = 256;
const SMALL_DRAWS: usize = 3;
const PROGRAM_DRAWS: usize = 8;

/// RNG for one function, fixed by the configured seed and the function's name.
pub(crate) fn function_rng(cfg: &AnalysisConfig, contract: &str, function: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(contract.as_bytes());
    h.update([0]);
    h.update(function.as_bytes());
    let digest = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(cfg.seed ^ u64::from_le_bytes(word))
}

/// Seeds for numeric parameters: 0, 1, up to three small program constants,
/// the maximum value, and up to eight program constants.
pub(crate) fn numeric_seeds(consts: &HarvestedConstants, rng: &mut ChaCha8Rng) -> BTreeSet<Expr> {
    let mut out: BTreeSet<U256> = [U256::ZERO, U256::ONE, U256::MAX].into_iter().collect();
    let small = consts.numeric.iter().filter(|c| **c < U256::from_u64(SMALL_LIMIT));
    out.extend(small.choose_multiple(rng, SMALL_DRAWS));
    out.extend(consts.numeric.iter().choose_multiple(rng, PROGRAM_DRAWS));
    out.into_iter().map(Expr::Const).collect()
}

/// Who may be sending a transaction.
pub(crate) fn sender_hypotheses(consts: &HarvestedConstants) -> BTreeSet<Expr> {
    let mut out: BTreeSet<Expr> = consts.address_like.iter().map(|c| Expr::Const(*c)).collect();
    out.insert(Expr::owner());
    out.insert(Expr::unprivileged_user());
    out
}

/// Address-parameter seeds under one sender hypothesis. The owner can pass a
/// value only it knows; everyone else a value only the attacker knows.
pub(crate) fn address_seeds(consts: &HarvestedConstants, sender: &Expr) -> BTreeSet<Expr> {
    let mut out: BTreeSet<Expr> = consts.address_like.iter().map(|c| Expr::Const(*c)).collect();
    if *sender == Expr::owner() {
        out.insert(Expr::owner_unique_value());
    } else {
        out.insert(Expr::user_unique_value());
    }
    out
}

pub(crate) fn bool_seeds() -> BTreeSet<Expr> {
    [Expr::constant(0u64), Expr::constant(1u64)].into_iter().collect()
}

/// Seeds of one parameter under one sender, honoring overrides.
pub(crate) fn param_seeds(
    cfg: &AnalysisConfig,
    consts: &HarvestedConstants,
    function: &Function,
    index: usize,
    sender: &Expr,
    numeric: &BTreeSet<Expr>,
) -> BTreeSet<Expr> {
    let p = &function.params[index];
    if let Some(vals) = cfg.seed_overrides.get(&(function.name.clone(), p.name.to_string())) {
        return vals.iter().map(crate::symexpr::normalize).collect();
    }
    match p.ty {
        ValueType::Uint256 => numeric.clone(),
        ValueType::Bool => bool_seeds(),
        ValueType::Address => address_seeds(consts, sender),
    }
}

/// Every value each parameter of `function` may be seeded with, across all
/// sender hypotheses.
pub fn seed_inputs(contract: &Contract, function: &str, cfg: &AnalysisConfig) -> BTreeMap<Var, BTreeSet<Expr>> {
    let Some(f) = contract.function(function) else {
        return BTreeMap::new();
    };
    let consts = harvest_constants(contract);
    let numeric = numeric_seeds(&consts, &mut function_rng(cfg, &contract.name, &f.name));
    let senders = sender_hypotheses(&consts);
    let mut out = BTreeMap::new();
    for (i, p) in f.params.iter().enumerate() {
        let mut vals = BTreeSet::new();
        for s in &senders {
            vals.extend(param_seeds(cfg, &consts, f, i, s, &numeric));
        }
        out.insert(p.name.clone(), vals);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse;

    #[test]
    fn small_programs_seed_every_constant() {
        let c = parse("contract C { function f(uint x) public { uint y = x + 3; y = y * 1000; } }").unwrap();
        let seeds = seed_inputs(&c, "f", &AnalysisConfig::default());
        let want: BTreeSet<Expr> = [0u64, 1, 3, 1000].into_iter().map(Expr::constant).chain([Expr::Const(U256::MAX)]).collect();
        assert_eq!(seeds[&Var::from("x")], want);
    }

    #[test]
    fn address_params_get_unique_values() {
        let c = parse("contract C { function f(address a) public { transfer(a, 0x42); transfer(0x77, 1); } }").unwrap();
        let seeds = seed_inputs(&c, "f", &AnalysisConfig::default());
        let want: BTreeSet<Expr> = [Expr::constant(0x77u64), Expr::owner_unique_value(), Expr::user_unique_value()].into_iter().collect();
        assert_eq!(seeds[&Var::from("a")], want);
        let only_owner = address_seeds(&harvest_constants(&c), &Expr::owner());
        assert!(!only_owner.contains(&Expr::user_unique_value()));
    }

    #[test]
    fn draws_are_bounded_and_deterministic() {
        let body: Vec<String> = (0..30).map(|i| format!("y = y + {};", 1000 + i * 7)).collect();
        let src = format!("contract C {{ function f(uint x) public {{ uint y = x; {} }} }}", body.join(" "));
        let c = parse(&src).unwrap();
        let cfg = AnalysisConfig::default();
        let a = seed_inputs(&c, "f", &cfg);
        assert_eq!(a, seed_inputs(&c, "f", &cfg));
        // 0, 1, MAX and eight draws; no small constants exist
        assert_eq!(a[&Var::from("x")].len(), 11);
        let other = AnalysisConfig { seed: 99, ..AnalysisConfig::default() };
        assert_ne!(a, seed_inputs(&c, "f", &other));
    }

    #[test]
    fn overrides_replace_seeds() {
        let c = parse("contract C { function f(uint x) public { } }").unwrap();
        let cfg = AnalysisConfig::default().override_seeds("f", "x", vec![Expr::constant(7u64)]);
        assert_eq!(seed_inputs(&c, "f", &cfg)[&Var::from("x")], [Expr::constant(7u64)].into_iter().collect());
    }
}
