//! Scratch probe: runs the desk-scale training recipe and reports cycle
//! counts at the target regularization weights. Not part of the test
//! suite; useful for eyeballing training health.


use nmg_core::field::Field;
use nmg_core::hierarchy::build_hierarchy;
use nmg_core::neural::{nmg_solve, NeuralHierarchy, SmootherKind};
use nmg_core::problem::{Boundary, ProblemSpec, Regularization, SigmaUnits};
use nmg_core::train::{train, FnoScale, LossMode, TrainConfig};
use rand::{Rng, SeedableRng};

fn main() {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);
    let spec = ProblemSpec {
        dimension: 1,
        n: 256,
        alpha: 1e-5,
        kernel_sigma: 1.5,
        sigma_units: SigmaUnits::Mesh,
        regularization: Regularization::Tikhonov,
        boundary: Boundary::Circulant,
    };
    let cfg = TrainConfig {
        num_levels: 4,
        batch_size: 20,
        rollout_cap: 10,
        epochs,
        lr: 1e-3,
        lr_halving_period: 500,
        seed: 2024,
        curriculum: vec![1e-3, 1e-4, 1e-5],
        loss: LossMode::Levelwise,
        scale: FnoScale::Desk,
        filtered: true,
    };
    let t0 = std::time::Instant::now();
    let (nh, log) = train(&spec, &cfg).unwrap();
    println!("trained in {:.1}s, {} epochs logged", t0.elapsed().as_secs_f64(), log.len());
    for stage in 0..3 {
        let first = log.iter().find(|e| e.stage == stage).unwrap();
        let last = log.iter().rev().find(|e| e.stage == stage).unwrap();
        println!(
            "stage {stage} (alpha={:.0e}): losses {:?} -> {:?}",
            first.alpha, first.losses, last.losses
        );
    }
    let params: Vec<_> = nh
        .smoothers
        .iter()
        .map(|s| match s {
            SmootherKind::Fno { config, params } => (config.clone(), params.clone()),
            _ => unreachable!(),
        })
        .collect();
    for alpha in [1e-4, 1e-5] {
        let mut sp = spec.clone();
        sp.alpha = alpha;
        let op = sp.build().unwrap();
        let base = build_hierarchy(op.clone(), 4).unwrap();
        let smoothers = params
            .iter()
            .map(|(c, p)| SmootherKind::Fno {
                config: c.clone(),
                params: p.clone(),
            })
            .collect();
        let nh_a = NeuralHierarchy::new(base, smoothers, true).unwrap();
        let mut counts = Vec::new();
        for k in 0..10u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + k);
            let x = Field::from_vec(
                (0..256)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect(),
            );
            let y = op.apply(&x).unwrap();
            match nmg_solve(&nh_a, &y, 4, 1e-6, 2000) {
                Ok(r) => counts.push(r.iterations as f64),
                Err(e) => println!("alpha={alpha:.0e} rhs {k}: {e}"),
            }
        }
        let mean = counts.iter().sum::<f64>() / counts.len().max(1) as f64;
        println!("alpha={alpha:.0e}: cycles {counts:?} mean {mean:.1}");
    }
}
