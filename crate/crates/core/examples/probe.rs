// Scratch experiment driver used while tuning desk-scale defaults.
use eqa_core::calib::CalibrationConfig;
use eqa_core::eval::{self, EvalConfig, Setting};
use eqa_core::gen::{build_dataset, DatasetConfig, Split};
use eqa_core::train::{self, JointConfig};
use std::path::Path;

fn main() {
    let dataset = build_dataset(&DatasetConfig::default()).unwrap();
    let navp = Path::new("/tmp/final_nav.ckpt");
    let qap = Path::new("/tmp/final_qa.ckpt");
    let (nav, qa) = if navp.exists() {
        (eqa_core::ckpt::load_nav(navp).unwrap(), eqa_core::ckpt::load_qa(qap).unwrap())
    } else {
        let t = std::time::Instant::now();
        let (nav, qa, curve) = train::joint_train(&dataset, &JointConfig::default());
        println!("trained in {:.0?}: acc={:.3}", t.elapsed(), curve.last().unwrap().nav_accuracy);
        eqa_core::ckpt::save_nav(navp, &nav).unwrap();
        eqa_core::ckpt::save_qa(qap, &qa).unwrap();
        (nav, qa)
    };
    let eval_cfg = EvalConfig::default();
    let seeds: Vec<u64> = (1..=5).collect();
    let calib_cfg = CalibrationConfig::default();

    let t = std::time::Instant::now();
    let cmp = eval::compare_settings(&nav, &qa, &dataset, Split::Test, &calib_cfg, &eval_cfg, &seeds).unwrap();
    println!("comparison ({:.0?})\n{}", t.elapsed(), cmp.render_text());
    let _ = Setting::Standard;

    let t = std::time::Instant::now();
    let lambdas = [0.0, 0.1, 0.2, 0.5, 0.8, 1.0];
    let lam = eval::sweep_lambda(&nav, &qa, &dataset, Split::Val, &lambdas, &calib_cfg, &eval_cfg, &seeds).unwrap();
    println!("lambda sweep on val ({:.0?}):", t.elapsed());
    for p in &lam.points {
        let m: f64 = p.progress.iter().map(|x| x.mean).sum::<f64>() / 3.0;
        println!("  lambda {:.1}: mean {:.3} | {}", p.x, m,
            p.progress.iter().map(|x| format!("{:.2}±{:.2}", x.mean, x.stddev)).collect::<Vec<_>>().join(" "));
    }

    let t = std::time::Instant::now();
    let counts = [1usize, 2, 3, 4, 5];
    let mk = eval::sweep_markers(&nav, &qa, &dataset, Split::Test, &counts, &calib_cfg, &eval_cfg, &seeds).unwrap();
    println!("marker sweep on test ({:.0?}):", t.elapsed());
    for p in &mk.points {
        println!("  n={}: {}", p.x,
            p.progress.iter().map(|x| format!("{:.2}±{:.2}", x.mean, x.stddev)).collect::<Vec<_>>().join(" "));
    }
}
