use std::collections::BTreeMap;

use phmm::enumerate::{self, empirical, total_variation};
use phmm::prediction::{bridge_fill, complete_path, decode_new, forecast, impute_missing, prediction_cache};
use phmm::sampler::draw_from_prior;
use phmm::{ChainTrace, HmmParams, ObservedSequence, PowerCache, Priors, RngStream, SamplerKind};

const DRAWS: usize = 60_000;

fn full_path_law(seq: &ObservedSequence, params: &HmmParams) -> BTreeMap<Vec<usize>, f64> {
    let weights: Vec<(Vec<usize>, f64)> = enumerate::paths(params.n_states(), seq.len())
        .map(|z| {
            let w = enumerate::joint_weight(seq, params, &z);
            (z, w)
        })
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    weights.into_iter().map(|(z, w)| (z, w / total)).collect()
}

fn params(seed: u64) -> HmmParams {
    draw_from_prior(&Priors::flat(2, 3), &mut RngStream::new(seed, 9)).unwrap()
}

#[test]
fn bridge_matches_conditioned_chain() {
    let a = HmmParams::reference_three_state().a;
    let cache = PowerCache::with_all_powers(&a, 4).unwrap();
    let mut rng = RngStream::new(21, 0);
    for (left, right, gap) in [(0, 2, 3), (1, 1, 4), (2, 0, 2)] {
        let got = empirical((0..DRAWS).map(|_| bridge_fill(left, right, gap, &cache, &mut rng).unwrap()));
        let tv = total_variation(&got, &enumerate::bridge_law(left, right, gap, &a));
        assert!(tv < 0.02, "({left},{right},{gap}): tv {tv}");
    }
}

#[test]
fn completed_path_follows_full_posterior() {
    let mut rng = RngStream::new(22, 0);
    for (case, entries) in
        [vec![None, None, Some(1), None, Some(2), None], vec![Some(0), None, None, Some(0), Some(2)], vec![None, None, None, None, None]]
            .into_iter()
            .enumerate()
    {
        let p = params(case as u64);
        let seq = ObservedSequence::new(entries);
        let cache = prediction_cache(&seq, &p).unwrap();
        let got = empirical((0..DRAWS).map(|_| complete_path(&seq, &p, &cache, &mut rng).unwrap()));
        let tv = total_variation(&got, &full_path_law(&seq, &p));
        assert!(tv < 0.03, "case {case}: tv {tv}");
    }
}

#[test]
fn forecast_extends_the_posterior_path() {
    let p = params(3);
    let trace = ChainTrace::point(SamplerKind::Collapsed, p.clone(), 0.0);
    let seq = ObservedSequence::new(vec![Some(1), None, Some(0)]);
    let mut extended = seq.entries().to_vec();
    extended.extend([None, None]);
    let want = full_path_law(&ObservedSequence::new(extended), &p);
    let mut rng = RngStream::new(23, 0);
    let paths = forecast(&trace, &seq, 2, DRAWS, &mut rng).unwrap();
    assert!(paths.iter().all(|z| z.len() == 5));
    let tv = total_variation(&empirical(paths), &want);
    assert!(tv < 0.03, "tv {tv}");
}

#[test]
fn imputed_symbols_match_predictive_marginals() {
    let mut rng = RngStream::new(24, 0);
    for case in 0..3u64 {
        let p = params(10 + case);
        let trace = ChainTrace::point(SamplerKind::Collapsed, p.clone(), 0.0);
        let seq = ObservedSequence::new(vec![None, Some(2), None, None, Some(0), None]);
        let draws = impute_missing(&trace, &seq, DRAWS, &mut rng).unwrap();
        let want = enumerate::missing_symbol_marginals(&seq, &p);
        for (slot, marginal) in want.iter().enumerate() {
            let got = empirical(draws.iter().map(|d| d[slot]));
            let want: BTreeMap<usize, f64> = marginal.iter().copied().enumerate().collect();
            let tv = total_variation(&got, &want);
            assert!(tv < 0.02, "case {case} slot {slot}: tv {tv}");
        }
    }
}

#[test]
fn decoding_a_new_sequence_matches_enumeration() {
    let p = params(30);
    let trace = ChainTrace::point(SamplerKind::Em, p.clone(), 0.0);
    let seq = ObservedSequence::new(vec![None, Some(0), None, Some(1), Some(2)]);
    let mut rng = RngStream::new(25, 0);
    let draws = decode_new(&trace, &seq, DRAWS, &mut rng).unwrap();
    let tv = total_variation(&empirical(draws.into_iter().map(|d| d.0)), &enumerate::observed_latent_posterior(&seq, &p));
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn mixture_over_draws_is_averaged() {
    // two point masses: imputations must mix their predictives evenly
    let p0 = params(40);
    let p1 = params(41);
    let mut trace = ChainTrace::point(SamplerKind::Collapsed, p0.clone(), 0.0);
    trace.draws.push(ChainTrace::point(SamplerKind::Collapsed, p1.clone(), 0.0).draws.remove(0));
    let seq = ObservedSequence::new(vec![Some(0), None]);
    let mut rng = RngStream::new(26, 0);
    let draws = impute_missing(&trace, &seq, DRAWS, &mut rng).unwrap();
    let m0 = &enumerate::missing_symbol_marginals(&seq, &p0)[0];
    let m1 = &enumerate::missing_symbol_marginals(&seq, &p1)[0];
    let want: BTreeMap<usize, f64> = (0..3).map(|y| (y, (m0[y] + m1[y]) / 2.0)).collect();
    let tv = total_variation(&empirical(draws.iter().map(|d| d[0])), &want);
    assert!(tv < 0.02, "tv {tv}");
}
