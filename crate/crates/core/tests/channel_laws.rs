use bitaudit::channel::{generate_bits, run_one_run_gaussian, simulate, Arrangement, Message, MechanismSpec};
use bitaudit::estimate::{ci_coverage, CiMethod};
use bitaudit::limits::{bit_error_floor, empirical_mutual_information, mi_upper_bound};
use bitaudit::tradeoff::TradeoffCurve;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

const SEED: u64 = 0xC4A7_7E15;

fn counts(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    Binomial::new(n, p).unwrap().sample(rng)
}

#[test]
fn decoder_rates_stay_in_tradeoff_region() {
    let n = 200_000;
    for (i, mu) in [0.2, 0.8, 3.2].into_iter().enumerate() {
        let curve = TradeoffCurve::gaussian(mu).unwrap();
        let bits = generate_bits(n, 0.5, SEED + i as u64).unwrap();
        let Message::Real(m) = run_one_run_gaussian(&bits, &MechanismSpec::gaussian(mu), SEED + 10 + i as u64).unwrap() else {
            panic!("gaussian channel must emit reals");
        };
        let n1 = bits.ones() as f64;
        let n0 = n as f64 - n1;
        for t in [0.3, 0.4, 0.5, 0.6, 0.7] {
            let fp = bits.bits.iter().zip(&m).filter(|(b, v)| !**b && **v > t).count() as f64 / n0;
            let fnr = bits.bits.iter().zip(&m).filter(|(b, v)| **b && **v <= t).count() as f64 / n1;
            let h = 1e-4;
            let slope = (curve.eval((fp + h).min(1.0)) - curve.eval((fp - h).max(0.0))) / (2.0 * h);
            let var = fnr * (1.0 - fnr) / n1 + slope * slope * fp * (1.0 - fp) / n0;
            let slack = 3.0 * var.sqrt();
            assert!(
                fnr >= curve.eval(fp) - slack,
                "mu={mu} t={t}: fn {fnr} below f({fp}) = {} by more than {slack}",
                curve.eval(fp)
            );
        }
    }
}

#[test]
fn transcript_error_dominates_bernoulli_surrogate() {
    let reps = 500;
    let n = 10_000u64;
    let mu = 0.8;
    let spec = MechanismSpec::gaussian(mu);
    let floor = bit_error_floor(&TradeoffCurve::gaussian(mu).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let e: Vec<f64> = (0..reps)
        .map(|r| simulate(&spec, Arrangement::OneRunMemoryless, n as usize, 0.5, SEED + r).unwrap().e_bar())
        .collect();
    let s: Vec<f64> = (0..reps).map(|_| counts(n, floor, &mut rng) as f64 / n as f64).collect();

    let sf = |xs: &[f64], t: f64| xs.iter().filter(|&&x| x > t).count() as f64 / xs.len() as f64;
    // Two-sample DKW band at level 1e-3.
    let r = reps as f64;
    let slack = ((2.0f64 / 1e-3).ln() * (2.0 / r) / 2.0).sqrt();
    let lo = floor - 4.0 * (floor * (1.0 - floor) / n as f64).sqrt();
    let hi = floor + 4.0 * (floor * (1.0 - floor) / n as f64).sqrt();
    for i in 0..=40 {
        let t = lo + (hi - lo) * i as f64 / 40.0;
        assert!(sf(&e, t) >= sf(&s, t) - slack, "t={t}: {} vs {}", sf(&e, t), sf(&s, t));
    }
}

#[test]
fn upper_estimates_cover_the_floor() {
    let reps = 2000u64;
    let gamma = 0.95;
    let slack = (gamma * (1.0 - gamma) / reps as f64).sqrt();
    for (i, curve) in [TradeoffCurve::gaussian(0.8).unwrap(), TradeoffCurve::eps_delta(1.0, 1e-5).unwrap()]
        .into_iter()
        .enumerate()
    {
        let p_true = bit_error_floor(&curve);
        for method in [CiMethod::Advanced, CiMethod::Hoeffding] {
            let cov = ci_coverage(method, p_true, 1000, gamma, reps, SEED + i as u64).unwrap();
            assert!(cov >= gamma - 2.0 * slack, "{method} at p={p_true}: coverage {cov}");
        }
    }
}

#[test]
fn empirical_mutual_information_below_bound() {
    let n = 1_000_000;
    let mu = 0.8;
    let t = simulate(&MechanismSpec::gaussian(mu), Arrangement::OneRunMemoryless, n, 0.5, SEED).unwrap();
    let c = t.confusion();
    let mi = empirical_mutual_information(c);
    let u = mi_upper_bound(&TradeoffCurve::gaussian(mu).unwrap(), 0.5).unwrap().u;

    let cells = [c[0][0], c[0][1], c[1][0], c[1][1]];
    let total: u64 = cells.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let boot: Vec<f64> = (0..200)
        .map(|_| {
            let mut left = total;
            let mut mass = 1.0;
            let mut draw = [0u64; 4];
            for k in 0..3 {
                let p = (cells[k] as f64 / total as f64 / mass).min(1.0);
                draw[k] = counts(left, p, &mut rng);
                left -= draw[k];
                mass -= cells[k] as f64 / total as f64;
            }
            draw[3] = left;
            empirical_mutual_information([[draw[0], draw[1]], [draw[2], draw[3]]])
        })
        .collect();
    let mean = boot.iter().sum::<f64>() / boot.len() as f64;
    let sd = (boot.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boot.len() - 1) as f64).sqrt();
    assert!(mi <= u + 3.0 * sd, "plug-in {mi} exceeds {u} + 3*{sd}");
}
