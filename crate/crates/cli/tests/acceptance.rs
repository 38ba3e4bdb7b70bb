//! Acceptance criteria, one line each. Exits non-zero if any criterion fails.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;
#[path = "../../core/tests/support/prop1.rs"]
mod prop1;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use coagency::abstraction::{check_abstraction, check_strong, prop1_preconditions, CheckConfig, StrongMode};
use coagency::examples::{self, actor_critic, shared_utility};
use coagency::experiment::{run_to_dir, ExperimentConfig, ExperimentRun};
use coagency::rationality::{all_contexts, is_agent, RationalityRelation};
use coagency::scm::value::{Value, VarId};
use coagency::surrogate::loss_and_gradient;
use coagency::voting::{ne_from_params, Mechanism};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Line {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn line(id: &'static str, passed: bool, detail: String) -> Line {
    Line { id, passed, detail }
}

fn ac1() -> Line {
    let start = Instant::now();
    let out = examples::run_example("battle-of-sexes", Some(0.01)).expect("battle runs");
    let secs = start.elapsed().as_secs_f64();
    let pair = |s: &coagency::scm::setting::Setting| {
        let g = |n: &str| s.get(&VarId::mechanism(n)).and_then(Value::as_f64).unwrap_or(f64::NAN);
        (g("D1"), g("D2"))
    };
    let pairs: Vec<(f64, f64)> = out.solutions.iter().map(pair).collect();
    let want = [(1.0, 1.0), (0.0, 0.0), (2.0 / 3.0, 1.0 / 3.0)];
    let found = want
        .iter()
        .all(|w| pairs.iter().any(|p| (p.0 - w.0).abs() <= 1e-12 && (p.1 - w.1).abs() <= 1e-12));
    line(
        "AC-1 battle of the sexes: exactly 3 equilibria in < 1 s",
        pairs.len() == 3 && found && secs < 1.0,
        format!("{} solutions {pairs:?}, {secs:.3} s", pairs.len()),
    )
}

fn ac2() -> Line {
    let start = Instant::now();
    let out = examples::run_example("actor-critic", Some(examples::ACTOR_CRITIC_CHECK_STEP)).expect("actor-critic runs");
    let p = actor_critic::actor_critic_pair_with_step(examples::ACTOR_CRITIC_CHECK_STEP);
    let strong = check_strong(
        &p.low,
        &p.map,
        &actor_critic::high_domains(examples::ACTOR_CRITIC_CHECK_STEP),
        StrongMode::Exhaustive,
    )
    .expect("strong check runs");
    let a = VarId::mechanism("A");
    let reward = actor_critic::utility("reward").expect("registered");
    let agent = is_agent(
        &p.high,
        &a,
        &RationalityRelation::BestResponse,
        &reward,
        all_contexts(&p.high, &a).expect("contexts"),
    )
    .expect("agency check runs");
    let secs = start.elapsed().as_secs_f64();
    let abs = out.abstraction.as_ref().expect("abstraction summary");
    line(
        "AC-2 actor-critic: exact abstraction on every grid intervention, strong, ~A* agent, < 30 s",
        abs.tested == 14641 && abs.matched == 14641 && out.passed && strong.strong && agent.is_agent && secs < 30.0,
        format!(
            "{}/{} matched, strong {}, agent {}, claims {}, {secs:.1} s",
            abs.matched, abs.tested, strong.strong, agent.is_agent, out.passed
        ),
    )
}

fn ac3() -> Line {
    let iv = shared_utility::utility_intervention(shared_utility::DEFAULT_U);
    let check = |r| {
        let p = shared_utility::shared_utility_pair(r);
        check_abstraction(&p.low, &p.high, &p.map, std::slice::from_ref(&iv), &CheckConfig::exact()).expect("check runs")
    };
    let br = check(shared_utility::Rationality::BestResponse);
    let fm = check(shared_utility::Rationality::FirstMover);
    let r0 = &br.results[0];
    line(
        "AC-3 shared utility: best response breaks the abstraction on ũ, first mover keeps it",
        !br.holds && r0.low_count == 2 && r0.high_count == 1 && fm.holds,
        format!("BR {} low vs {} high, FM holds {}", r0.low_count, r0.high_count, fm.holds),
    )
}

fn ac4() -> Line {
    let start = Instant::now();
    let mut not_nontrivial = 0;
    let mut preconditions = 0;
    for seed in 0..200 {
        let case = prop1::generate(seed, true);
        let pre = prop1_preconditions(&case.low, &case.high, &case.map, &case.target).expect("preconditions");
        if pre.conclusion {
            preconditions += 1;
        }
        if !prop1::nontrivial_under_any(&case, seed) {
            not_nontrivial += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        "AC-4 no emergence: 200 random abstractions, target never a non-trivial agent, < 60 s",
        not_nontrivial == 200 && preconditions == 200 && secs < 60.0,
        format!("not nontrivial {not_nontrivial}/200, preconditions {preconditions}/200, {secs:.1} s"),
    )
}

fn ac8() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(0xac8);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (net, x, y, delta) = oracles::random_gradient_config(&mut rng);
        let (_, grads) = loss_and_gradient(&net, x.view(), y.view(), &delta).expect("gradient");
        let fd = oracles::numeric_gradient(&net, &x, &y, &delta, 1e-5);
        worst = worst.max(oracles::relative_error(&grads.flat(), &fd));
    }
    line(
        "AC-8 analytic gradient vs central differences (h = 1e-5), 50 configs, rel. error < 1e-4",
        worst < 1e-4,
        format!("worst {worst:.2e}"),
    )
}

fn ac9() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(0xac9);
    let (mut worst_q, mut worst_sum): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let p = oracles::random_params(&mut rng);
        let ne = ne_from_params(&p);
        worst_sum = worst_sum.max((ne.q.iter().sum::<f64>() - ne.q_w).abs());
        for c in 0..p.alpha.len() {
            let br = oracles::best_response(&p, c, ne.q_w - ne.q[c]);
            worst_q = worst_q.max((br - ne.q[c]).abs());
        }
    }
    line(
        "AC-9 closed-form equilibrium vs golden-section best responses, 100 draws",
        worst_q <= 1e-6 && worst_sum <= 1e-12,
        format!("max |q - oracle| {worst_q:.2e}, max |Σq - Q_W| {worst_sum:.2e}"),
    )
}

fn mechanism_lines(vcg: &ExperimentRun, median: &ExperimentRun, dictator: &ExperimentRun) -> Vec<Line> {
    let v = &vcg.report.eval;
    let worst_delta = v.per_country.iter().filter_map(|c| c.mae_delta).fold(0.0, f64::max);
    let m = &median.report.eval;
    let residual = m.max_fixed_point_residual.unwrap_or(f64::INFINITY);
    let d = &dictator.report.eval;
    let floor = d.stochasticity_floor.as_ref().map_or(f64::NAN, |f| f.mae);
    vec![
        line(
            "AC-5 VCG: δ̂ exact, model MAE ≤ 0.15, improvement ≥ 0.90",
            worst_delta <= 1e-6 && v.model_mae <= 0.15 && v.improvement >= 0.90,
            format!(
                "max MAE(δ) {worst_delta:.2e}, model MAE {:.4}, improvement {:.4}",
                v.model_mae, v.improvement
            ),
        ),
        line(
            "AC-6 median: improvement ≥ 0.80, fixed-point residual ≤ 1e-5",
            m.improvement >= 0.80 && residual <= 1e-5,
            format!("improvement {:.4}, residual {residual:.2e}", m.improvement),
        ),
        line(
            "AC-7 random dictator: improvement ≤ 0.20, floor above the VCG model MAE",
            d.improvement <= 0.20 && floor > v.model_mae,
            format!("improvement {:.4}, floor MAE {floor:.4}, VCG model MAE {:.4}", d.improvement, v.model_mae),
        ),
    ]
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

/// Second VCG run through the binary, compared byte for byte with the
/// library run.
fn ac10(library_out: &Path, scratch: &Path) -> Line {
    let out = scratch.join("cli-vcg");
    let status = Command::new(env!("CARGO_BIN_EXE_coagency"))
        .args(["--seed", "0", "experiment", "run", "--mechanism", "vcg", "--out"])
        .arg(&out)
        .output()
        .expect("binary runs");
    let a = csv_files(library_out);
    let b = csv_files(&out);
    let same = !a.is_empty() && a == b;
    line(
        "AC-10 same seed, same CSV bytes across two runs",
        same,
        format!(
            "{} CSV files compared, identical {same}, second run exit {:?}",
            a.len(),
            status.status.code()
        ),
    )
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temp dir");
    let mut lines = vec![ac1(), ac2(), ac3(), ac4(), ac8(), ac9()];
    for l in &lines {
        println!("[{}] {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.id, l.detail);
    }

    let cfg = ExperimentConfig::default();
    let runs: Vec<ExperimentRun> = [Mechanism::Vcg, Mechanism::Median, Mechanism::Dictator]
        .into_iter()
        .map(|mech| {
            let dir = scratch.path().join(mech.to_string());
            run_to_dir(&cfg, mech, &dir, "acceptance").expect("experiment runs").0
        })
        .collect();
    let mut rest = mechanism_lines(&runs[0], &runs[1], &runs[2]);
    rest.push(ac10(&scratch.path().join("vcg"), scratch.path()));
    for l in &rest {
        println!("[{}] {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.id, l.detail);
    }
    lines.extend(rest);

    let failed = lines.iter().filter(|l| !l.passed).count();
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
