use std::io::Write;

use cramerlab::measures::MeasureModel;
use cramerlab::polytope::estimate_measure;
use cramerlab::rng::RngStream;

fn main() {
    let stream = RngStream::new(0xBEEF);
    let mut log = std::fs::File::create("/tmp/probe.log").unwrap();
    let cases: Vec<(&str, MeasureModel, Vec<f64>, usize, usize)> = vec![
        (
            "gauss10",
            MeasureModel::standard_gaussian(10).unwrap(),
            vec![0.7, 0.75, 0.8, 0.85, 0.9],
            8,
            256,
        ),
        (
            "cube8",
            MeasureModel::uniform_cube(8, 1.0).unwrap(),
            vec![0.9, 1.0, 1.1, 1.2, 1.3],
            8,
            192,
        ),
        (
            "gauss16",
            MeasureModel::standard_gaussian(16).unwrap(),
            vec![0.6, 0.65, 0.7, 0.75],
            4,
            128,
        ),
        (
            "cube12",
            MeasureModel::uniform_cube(12, 1.0).unwrap(),
            vec![0.85, 0.95, 1.05],
            4,
            96,
        ),
        (
            "ball10",
            MeasureModel::uniform_ball_vol1(10).unwrap(),
            vec![1.1, 1.2, 1.3, 1.4],
            4,
            96,
        ),
    ];
    for (name, model, rhos, trials, points) in cases {
        let n = model.dimension();
        for rho in rhos {
            let count = ((rho * n as f64).exp().round() as usize).max(n + 1);
            if count > 1_200_000 {
                writeln!(log, "{name} rho={rho} N={count} SKIP").unwrap();
                continue;
            }
            let t0 = std::time::Instant::now();
            let m = estimate_measure(&model, count, trials, points, stream).unwrap();
            writeln!(
                log,
                "{name} rho={rho} N={count} est={:.4} se={:.4} [{:.1?}]",
                m.estimate,
                m.stderr,
                t0.elapsed()
            )
            .unwrap();
            log.flush().unwrap();
        }
    }
    writeln!(log, "DONE").unwrap();
}
