use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use gauge_logic::analysis;
use gauge_logic::banach_mazur::{certify_delta, simplex_min_norm, NormKind, NormedSpace};
use gauge_logic::corpus::{corpus_formula, corpus_structure, relationalize, Rng};
use gauge_logic::embound::{embound, recover};
use gauge_logic::rational::{rat, ratio, Rat};
use gauge_logic::structure::{all_assignments, eval_formula, prenex, sup_window};
use gauge_logic::syntax::free_vars;
use gauge_logic::theories::{measure_algebra, Caps};

fn bench_eval(c: &mut Criterion) {
    let mut rng = Rng::new(17);
    let m = corpus_structure(&mut rng, 6, false);
    let formulas: Vec<_> = (0..20).map(|_| corpus_formula(&mut rng, 3)).collect();
    c.bench_function("eval_formula_corpus", |b| {
        b.iter(|| {
            for f in &formulas {
                for asg in all_assignments(&m, &free_vars(f)).into_iter().take(4) {
                    black_box(eval_formula(&m, f, &asg).unwrap());
                }
            }
        })
    });
}

fn bench_analysis(c: &mut Criterion) {
    let mut rng = Rng::new(29);
    let m = corpus_structure(&mut rng, 5, false);
    let formulas: Vec<_> = (0..40).map(|_| corpus_formula(&mut rng, 3)).collect();
    c.bench_function("classify_and_synthesize", |b| {
        b.iter(|| {
            for f in &formulas {
                black_box(analysis::classify(f).unwrap());
                black_box(analysis::synthesize_modulus(&m.signature, f).unwrap());
            }
        })
    });
}

fn bench_windows_and_prenex(c: &mut Criterion) {
    let mut rng = Rng::new(41);
    let vars = vec!["x".to_string()];
    let formulas: Vec<_> = (0..10)
        .map(|_| gauge_logic::corpus::corpus_formula_with_vars(&mut rng, 2, &vars))
        .collect();
    let r = rat(1);
    let rp = rat(2);
    c.bench_function("sup_window_expand", |b| {
        b.iter(|| {
            for f in &formulas {
                black_box(sup_window(f, "x", &r, &rp).unwrap());
            }
        })
    });
    c.bench_function("prenex_transform", |b| {
        b.iter(|| {
            for f in &formulas {
                black_box(prenex(f));
            }
        })
    });
}

fn bench_embound_roundtrip(c: &mut Criterion) {
    let mut rng = Rng::new(53);
    let m = relationalize(&corpus_structure(&mut rng, 6, false));
    c.bench_function("embound_recover_roundtrip", |b| {
        b.iter(|| {
            let e = embound(&m).unwrap();
            black_box(recover(&e.structure, e.infinity_name(), Some(&m.signature)).unwrap());
        })
    });
}

fn bench_measure_algebra(c: &mut Criterion) {
    let caps = Caps::default();
    let weights: Vec<Rat> = vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)];
    c.bench_function("measure_algebra_validate", |b| {
        b.iter(|| {
            let m = measure_algebra(&weights, &caps).unwrap();
            black_box(gauge_logic::structure::validate(&m).pass());
        })
    });
}

fn bench_banach_mazur(c: &mut Criterion) {
    let space = NormedSpace::new(3, NormKind::LInf);
    let basis: Vec<Vec<Rat>> = vec![
        vec![rat(1), rat(0), rat(0)],
        vec![rat(1), rat(1), rat(0)],
        vec![rat(0), ratio(1, 2), rat(1)],
    ];
    let eps = ratio(1, 4);
    c.bench_function("simplex_min_norm_3d", |b| {
        b.iter(|| black_box(simplex_min_norm(&basis, &space).unwrap()))
    });
    c.bench_function("certify_delta_3d", |b| {
        b.iter(|| black_box(certify_delta(&basis, &eps, &space).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_eval,
    bench_analysis,
    bench_windows_and_prenex,
    bench_embound_roundtrip,
    bench_measure_algebra,
    bench_banach_mazur
);
criterion_main!(benches);
