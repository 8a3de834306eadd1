use criterion::{black_box, criterion_group, criterion_main, Criterion};
use diffvoi::analysis::{self, BranchSelector, GridAxis, MetricChoice, ScanSpec, SelectOptions};
use diffvoi::info::{capacity_numeric, Channel, Units};
use diffvoi::qre::{self, principal_equilibrium, SolveOptions, TraceOptions};
use diffvoi::scenarios;
use diffvoi::sensitivity::{statistic_gradient, strategy_derivatives, Statistic};
use diffvoi::{ParamPoint, StrategyProfile};

fn solvers(c: &mut Criterion) {
    let blackwell = scenarios::blackwell();
    let p = ParamPoint::new(&blackwell, vec![0.17, 0.22], vec![5.0]).unwrap();
    c.bench_function("blackwell fixed point", |b| {
        b.iter(|| {
            qre::solve(
                &blackwell,
                black_box(&p),
                &StrategyProfile::uniform(&blackwell),
                &SolveOptions::default(),
            )
            .unwrap()
        })
    });

    let bagwell = scenarios::bagwell_symmetric();
    let q = ParamPoint::new(&bagwell, vec![0.05], vec![10.0, 10.0]).unwrap();
    c.bench_function("bagwell enumerate 32 starts", |b| {
        b.iter(|| qre::enumerate_equilibria(&bagwell, black_box(&q), 32, &SolveOptions::default()).unwrap())
    });
    c.bench_function("bagwell principal continuation", |b| {
        b.iter(|| principal_equilibrium(&bagwell, black_box(&q), &TraceOptions::default()).unwrap())
    });
}

fn sensitivities(c: &mut Criterion) {
    let m = scenarios::bagwell();
    let p = ParamPoint::new(&m, vec![0.1, 0.2], vec![10.0, 10.0]).unwrap();
    let e = principal_equilibrium(&m, &p, &TraceOptions::default()).unwrap();
    let s = m.node_index("S").unwrap();
    c.bench_function("bagwell strategy derivatives", |b| {
        b.iter(|| strategy_derivatives(&m, black_box(&e)).unwrap())
    });
    let cap = Statistic::Capacity {
        node: s,
        units: Units::Bits,
    };
    c.bench_function("bagwell capacity gradient", |b| {
        b.iter(|| statistic_gradient(&m, black_box(&e), &cap).unwrap())
    });

    let ch = Channel::new(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.6, 0.3], vec![0.2, 0.2, 0.6]]).unwrap();
    c.bench_function("blahut-arimoto 3x3", |b| {
        b.iter(|| capacity_numeric(black_box(&ch), 1e-12).unwrap())
    });
}

fn scans(c: &mut Criterion) {
    let m = scenarios::blackwell();
    let spec = ScanSpec {
        grid: vec![
            GridAxis::parse(&m, "eps1=0.05:0.45:5").unwrap(),
            GridAxis::parse(&m, "eps2=0.05:0.45:5").unwrap(),
        ],
        base: ParamPoint::new(&m, vec![0.17, 0.22], vec![5.0]).unwrap(),
        branch: BranchSelector::Principal,
        stats: vec![analysis::parse_statistic(&m, "MI:X;S", Units::Bits).unwrap()],
        metric: MetricChoice::FisherTotal,
        select: SelectOptions::default(),
    };
    let mut g = c.benchmark_group("scan");
    g.sample_size(10);
    g.bench_function("blackwell 5x5", |b| {
        b.iter(|| analysis::scan(&m, black_box(&spec)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, solvers, sensitivities, scans);
criterion_main!(benches);
