use proptest::prelude::*;

use rent_market::analytics::{
    equilibrium_rent, grid_moments, mean_tenure, occupancy_spell_lengths, predict, sigma_x,
    simulate_meanfield_walk, stationary_gaussian, stationary_leading_order, stationary_zero_flux,
    uniform_grid, DownRate, MeanFieldWalk, ValidityWarning, WalkConfig,
};
use rent_market::rng::SimRng;
use rent_market::ModelParams;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn reference_point_values() {
    let pred = predict(&ModelParams::reference()).unwrap();
    assert!((pred.p_eq - 81.0526).abs() < 1e-3, "{}", pred.p_eq);
    assert!((pred.x_eq - 1.90877).abs() < 1e-5, "{}", pred.x_eq);
    assert!((pred.n_o - 1.48052).abs() < 1e-5, "{}", pred.n_o);
    assert!((pred.n_v - 0.857143).abs() < 1e-6, "{}", pred.n_v);
    assert!((pred.sigma_x - 0.0841).abs() < 1e-4, "{}", pred.sigma_x);
    assert!(pred.warnings.is_empty());
    let t = mean_tenure(&ModelParams::reference()).unwrap();
    assert!(close(t, 2.0 * 2000.0 / pred.p_eq, 1e-12));
}

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (
        0.02f64..0.98,
        0.01f64..=1.0,
        50.0f64..1e4,
        50.0f64..1e4,
        1e-4f64..1e-2,
        1u32..10,
        1u32..20,
    )
        .prop_map(|(rho, pi_r, ps, pl, a, nr, extra)| ModelParams {
            density: rho,
            raise_prob: pi_r,
            search_scale: ps,
            lower_scale: pl,
            lattice_resolution: a,
            raise_steps: nr,
            lower_steps: nr + extra,
            ..ModelParams::reference()
        })
}

proptest! {
    #[test]
    fn equilibrium_rent_monotonicity(p in params_strategy(), bump in 1.01f64..2.0) {
        let (base, _) = equilibrium_rent(&p).unwrap();
        let denser = ModelParams { density: p.density + (1.0 - p.density) * 0.5, ..p };
        prop_assert!(equilibrium_rent(&denser).unwrap().0 > base);
        let cheaper_lowering = ModelParams { lower_scale: p.lower_scale * bump, ..p };
        prop_assert!(equilibrium_rent(&cheaper_lowering).unwrap().0 > base);
        let bigger_raise = ModelParams { raise_steps: p.raise_steps + 1, ..p };
        if bigger_raise.raise_steps < bigger_raise.lower_steps {
            prop_assert!(equilibrium_rent(&bigger_raise).unwrap().0 > base);
        }
        // independent of the search scale
        let far = ModelParams { search_scale: p.search_scale * bump, ..p };
        prop_assert_eq!(equilibrium_rent(&far).unwrap().0, base);
    }

    #[test]
    fn width_trends(p in params_strategy(), bump in 1.01f64..2.0) {
        let s = sigma_x(&p).unwrap();
        let wider_search = ModelParams { search_scale: p.search_scale * bump, ..p };
        prop_assert!(sigma_x(&wider_search).unwrap() > s);
        let denser = ModelParams { density: p.density + (1.0 - p.density) * 0.5, ..p };
        prop_assert!(sigma_x(&denser).unwrap() < s);
    }

    #[test]
    fn vacancy_probability_matches_spells(p in params_strategy()) {
        let s = occupancy_spell_lengths(&p).unwrap();
        let pred = predict(&p).unwrap();
        prop_assert!(close(s.n_o * p.raise_steps as f64, s.n_v * p.lower_steps as f64, 1e-12));
        let pi_v = pred.p_eq * p.density / (2.0 * p.search_scale * (1.0 - p.density));
        prop_assert!(close(pred.pi_v, pi_v, 1e-12));
        let saturated = pred.warnings.contains(&ValidityWarning::FillProbabilitySaturated);
        prop_assert_eq!(saturated, pred.pi_v > 1.0);
    }
}

#[test]
fn zero_flux_density_converges_under_grid_refinement() {
    let params = ModelParams::reference();
    let pred = predict(&params).unwrap();
    let span = 12.0 * pred.sigma_x;
    let moments = |points| {
        let g = uniform_grid(pred.x_eq - span, pred.x_eq + span, points);
        grid_moments(&stationary_zero_flux(&params, &g).unwrap())
    };
    let (m1, s1) = moments(2001);
    let (m2, s2) = moments(4001);
    assert!(close(s1, s2, 1e-3), "{s1} vs {s2}");
    assert!((m1 - m2).abs() < 1e-3 * s2);
}

fn relative_gap_to_gaussian(a: f64) -> f64 {
    let params = ModelParams {
        lattice_resolution: a,
        ..ModelParams::reference()
    };
    let pred = predict(&params).unwrap();
    let span = 10.0 * pred.sigma_x;
    let grid = uniform_grid(pred.x_eq - span, pred.x_eq + span, 4001);
    let zf = stationary_zero_flux(&params, &grid).unwrap();
    let g = stationary_gaussian(&params, &grid).unwrap();
    let peak = g.iter().map(|p| p.1).fold(0.0, f64::max);
    zf.iter()
        .zip(&g)
        .map(|(a, b)| (a.1 - b.1).abs())
        .fold(0.0, f64::max)
        / peak
}

#[test]
fn zero_flux_approaches_the_gaussian_as_the_lattice_refines() {
    let coarse = relative_gap_to_gaussian(0.001);
    let fine = relative_gap_to_gaussian(0.0001);
    assert!(fine < coarse, "{fine} vs {coarse}");
    // the gap scales like sqrt(a)
    assert!(fine < 0.5 * coarse, "{fine} vs {coarse}");
}

#[test]
fn prefactor_shifts_the_mode_below_the_drift_zero() {
    let params = ModelParams::reference();
    let pred = predict(&params).unwrap();
    let grid = uniform_grid(pred.x_eq - 1.0, pred.x_eq + 1.0, 40_001);
    let mode = |d: Vec<(f64, f64)>| {
        d.into_iter()
            .fold(
                (0.0, f64::NEG_INFINITY),
                |b, p| if p.1 > b.1 { p } else { b },
            )
            .0
    };
    let lead = mode(stationary_leading_order(&params, &grid).unwrap());
    let full = mode(stationary_zero_flux(&params, &grid).unwrap());
    let step = grid[1] - grid[0];
    assert!((lead - pred.x_eq).abs() <= step);
    let shift = params.lattice_resolution * pred.n_v * params.lower_steps as f64 / 2.0;
    assert!(
        ((lead - full) - shift).abs() < 0.1 * shift,
        "{} vs {shift}",
        lead - full
    );
}

#[test]
fn constant_rate_walk_spreads_linearly() {
    let params = ModelParams::reference();
    let q = 0.3;
    let walkers = 4000;
    let checkpoints = [250usize, 500, 1000];
    let mut sums = vec![(0.0f64, 0.0f64); checkpoints.len()];
    let mut rng = SimRng::for_dynamics(5);
    let mut rates = None;
    for _ in 0..walkers {
        let mut w = MeanFieldWalk::new(&params, DownRate::Constant(q), 1000.0).unwrap();
        rates = Some(*w.rates());
        let mut c = 0;
        for t in 1..=checkpoints[checkpoints.len() - 1] {
            w.step(&mut rng).unwrap();
            if t == checkpoints[c] {
                let d = w.x() - 1000.0;
                sums[c].0 += d;
                sums[c].1 += d * d;
                c += 1;
            }
        }
    }
    let r = rates.unwrap();
    let per_step = r.up_rate * (1.0 - r.up_rate) * r.up_jump * r.up_jump
        + q * (1.0 - q) * r.down_jump * r.down_jump;
    for (k, &t) in checkpoints.iter().enumerate() {
        let n = walkers as f64;
        let mean = sums[k].0 / n;
        let var = sums[k].1 / n - mean * mean;
        let expect = per_step * t as f64;
        assert!(close(var, expect, 0.08), "t={t}: {var} vs {expect}");
    }
}

#[test]
fn walk_reports_a_consistent_histogram() {
    let params = ModelParams::reference();
    let w = simulate_meanfield_walk(&params, &WalkConfig::new(200_000, 10_000, 3)).unwrap();
    assert_eq!(w.steps, 200_000);
    assert_eq!(w.counts.iter().sum::<u64>(), 200_000);
    let mass: f64 = w.density().iter().map(|p| p.1).sum::<f64>() * w.bin_width;
    assert!((mass - 1.0).abs() < 1e-9);
    let pred = predict(&params).unwrap();
    assert!((w.mean - pred.x_eq).abs() < 0.05);
    assert!(close(w.std, pred.sigma_x, 0.2));
    assert!(w.standard_error > 0.0);
    let again = simulate_meanfield_walk(&params, &WalkConfig::new(200_000, 10_000, 3)).unwrap();
    assert_eq!(w, again);
    assert!(simulate_meanfield_walk(&params, &WalkConfig::new(0, 0, 3)).is_err());
}
