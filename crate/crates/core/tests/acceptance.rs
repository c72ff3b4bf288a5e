//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::process::Command;
use std::time::Instant;

use leftorders::cantor::{
    derivative_at_horizon, dichotomy_report, BranchTree, DichotomyConfig, Verdict,
};
use leftorders::orderspace::{build_tree, enumerate_level, oracle_enumerate};
use leftorders::properties::run_properties;
use leftorders::subgroups::{subgroup_ball, verify_restriction_continuity, SubgroupSpec};
use leftorders::{parse_group_spec, GroupCtx, SearchConfig};

const FIXTURES: [&str; 9] = ["1", "C2", "C3", "S3", "Z", "Z^2", "F2", "KB", "H3"];
const PROPERTY_SEED: u64 = 0x5eed_2024;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ctx(s: &str) -> GroupCtx {
    parse_group_spec(s).unwrap()
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn oracle_equivalence() -> Outcome {
    let mut checked = 0;
    for name in FIXTURES {
        let g = ctx(name);
        let mut r = 0;
        // finite groups have constant balls from some radius on
        while r <= 8 && g.ball(r).len() - 1 <= 20 {
            let fast = enumerate_level(&g, r, &SearchConfig::default()).map_err(|e| e.to_string())?;
            let parallel = enumerate_level(&g, r, &SearchConfig { jobs: 4, ..Default::default() })
                .map_err(|e| e.to_string())?;
            let slow = oracle_enumerate(&g, r, 1 << 20).map_err(|e| e.to_string())?;
            check(fast == slow, format!("{name} radius {r}: search {} vs oracle {}", fast.len(), slow.len()))?;
            check(parallel == fast, format!("{name} radius {r}: jobs 4 differs"))?;
            checked += 1;
            r += 1;
        }
    }
    Ok(format!("{checked} (group, radius) pairs agree"))
}

fn exact_counts() -> Outcome {
    let cfg = SearchConfig::default();
    let counts = |name: &str, r: u32| build_tree(&ctx(name), r, &cfg).unwrap().counts();
    check(counts("1", 6) == vec![1; 7], "trivial group")?;
    check(counts("C2", 1)[1] == 0, "C2")?;
    check(counts("C3", 1)[1] == 0, "C3")?;
    check(counts("S3", 2)[2] == 0, "S3")?;
    check(counts("Z", 6)[1..] == [2; 6], "Z")?;
    let z2 = counts("Z^2", 2);
    let z2_oracle = oracle_enumerate(&ctx("Z^2"), 2, 1 << 20).unwrap().len();
    check(z2[1] == 4 && z2[2] == 8 && z2_oracle == 8, format!("Z^2 {z2:?}"))?;
    let f2 = counts("F2", 4);
    check(f2[1] == 4 && f2.windows(2).skip(1).all(|w| w[0] < w[1]), format!("F2 {f2:?}"))?;
    for horizon in [8, 9, 10] {
        let v = dichotomy_report(&ctx("KB"), &DichotomyConfig::new(4, horizon)).unwrap().verdict;
        check(v == Verdict::FiniteEvidence(4), format!("KB horizon {horizon}: {v}"))?;
    }
    Ok(format!("Z^2 {z2:?}, F2 {f2:?}, KB FINITE_EVIDENCE(4) at horizons 8..10"))
}

fn dichotomy_settings() -> Vec<(&'static str, u32, u32, Verdict)> {
    vec![
        ("1", 2, 4, Verdict::FiniteEvidence(1)),
        ("C2", 1, 3, Verdict::FiniteEvidence(0)),
        ("C3", 1, 3, Verdict::FiniteEvidence(0)),
        ("S3", 2, 4, Verdict::FiniteEvidence(0)),
        ("Z", 2, 6, Verdict::FiniteEvidence(2)),
        ("Z^2", 2, 4, Verdict::PerfectKernelEvidence),
        ("F2", 3, 5, Verdict::PerfectKernelEvidence),
        ("KB", 4, 8, Verdict::FiniteEvidence(4)),
        ("H3", 2, 4, Verdict::PerfectKernelEvidence),
    ]
}

fn dichotomy_echo() -> Outcome {
    let mut summary = Vec::new();
    for (name, r, h, expected) in dichotomy_settings() {
        let report = dichotomy_report(&ctx(name), &DichotomyConfig::new(r, h)).map_err(|e| e.to_string())?;
        check(report.verdict != Verdict::Inconclusive, format!("{name}: inconclusive"))?;
        check(report.verdict == expected, format!("{name}: {} expected {expected}", report.verdict))?;
        // never stable-but-branching: finite evidence implies no branching node
        if let Verdict::FiniteEvidence(_) = report.verdict {
            check(report.branching_nodes == 0, format!("{name}: finite with branching"))?;
        }
        summary.push(format!("{name}={}", report.verdict));
    }
    Ok(summary.join(" "))
}

fn property_suites() -> Outcome {
    let mut total = 0;
    for (name, r) in [("Z", 6), ("Z^2", 5), ("F2", 5), ("KB", 6), ("H3", 7)] {
        let outcomes = run_properties(&ctx(name), r, 1000, PROPERTY_SEED, 10_000_000).map_err(|e| e.to_string())?;
        for o in outcomes {
            check(o.cases >= 1000, format!("{name} {}: {} cases", o.name, o.cases))?;
            check(
                o.passed(),
                format!("{name} {}: {} failures, first {:?}", o.name, o.failures, o.first_failure),
            )?;
            total += o.cases;
        }
    }
    for name in FIXTURES {
        let radius = if name == "F2" { 3 } else { 4 };
        let tree = build_tree(&ctx(name), radius, &SearchConfig::default()).unwrap();
        for level in tree.levels() {
            let signs: std::collections::BTreeSet<_> = level.iter().map(|n| n.cone.signs().to_vec()).collect();
            check(
                level.iter().all(|n| signs.contains(n.cone.flipped().signs())),
                format!("{name}: level not closed under the antipodal map"),
            )?;
            total += level.len();
        }
    }
    Ok(format!("{total} cases, seed {PROPERTY_SEED:#x}"))
}

fn restriction_continuity() -> Outcome {
    let mut checked = 0;
    for (name, sub) in [("Z^2", "e1"), ("Z", "a^2"), ("F2", "a*b")] {
        let g = ctx(name);
        let spec = SubgroupSpec::parse(&g, sub).map_err(|e| e.to_string())?;
        let level = 2 * spec.max_word_norm() as u32;
        let tree = build_tree(&g, level, &SearchConfig::default()).map_err(|e| e.to_string())?;
        for s in 1..=2u32 {
            for entry in subgroup_ball(&spec, s) {
                if entry.element.is_identity() {
                    continue;
                }
                let lowest = s * spec.max_word_norm() as u32;
                for l in lowest..=level {
                    let ok = verify_restriction_continuity(&tree, &spec, &entry.element, l)
                        .map_err(|e| e.to_string())?;
                    check(ok, format!("{name} <{sub}> h={} level {l}", g.format_element(&entry.element)))?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} (subgroup, h, level) checks"))
}

fn derivative_traces() -> Outcome {
    let non_increasing = |t: &[usize]| t.windows(2).all(|w| w[0] >= w[1]);
    let fixed = |t: &[usize]| t.len() >= 2 && t[t.len() - 1] == t[t.len() - 2];

    let z = build_tree(&ctx("Z"), 6, &SearchConfig::default()).unwrap();
    let z = BranchTree::from_prefix_tree(&z.prune_to_horizon(6).unwrap());
    let tz = derivative_at_horizon(&z, 2, 6, 3).map_err(|e| e.to_string())?;
    check(tz[0] == 2 && tz[1] == 0 && non_increasing(&tz) && fixed(&tz), format!("Z trace {tz:?}"))?;

    let full = BranchTree::full_binary(6);
    let tf = derivative_at_horizon(&full, 3, 6, 4).map_err(|e| e.to_string())?;
    check(tf.iter().all(|&c| c == 8), format!("full binary trace {tf:?}"))?;

    let mixed = BranchTree::join(&[BranchTree::full_binary(4), BranchTree::path(4)]);
    let tm = derivative_at_horizon(&mixed, 1, 5, 3).map_err(|e| e.to_string())?;
    check(tm == [2, 1, 1, 1], format!("mixed trace {tm:?}"))?;

    for (name, r, h, _) in dichotomy_settings() {
        let report = dichotomy_report(&ctx(name), &DichotomyConfig::new(r, h)).map_err(|e| e.to_string())?;
        let t = &report.derivative_trace;
        check(non_increasing(t) && fixed(t), format!("{name} trace {t:?}"))?;
        check(t.len() - 1 <= (t[0] + 1).max(2), format!("{name} trace too long"))?;
    }
    Ok(format!("Z {tz:?}, full binary {tf:?}, mixed {tm:?}"))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_leftorders");
    let commands: Vec<Vec<&str>> = vec![
        vec!["enumerate", "--group", "Z", "--radius", "3"],
        vec!["enumerate", "--group", "C2", "--radius", "1"],
        vec!["enumerate", "--group", "Z^2", "--radius", "1", "--format", "json"],
        vec!["enumerate", "--group", "F2", "--radius", "4"],
        vec!["enumerate", "--group", "H3", "--radius", "3", "--format", "json"],
        vec!["dichotomy", "--group", "KB", "--radius", "4", "--horizon", "8"],
        vec!["dichotomy", "--group", "F2", "--radius", "3", "--horizon", "5", "--format", "json"],
        vec!["dichotomy", "--group", "1", "--radius", "2", "--horizon", "4"],
        vec!["dichotomy", "--group", "Z", "--radius", "1", "--horizon", "2"],
        vec!["orbits", "--group", "KB", "--level", "5"],
        vec!["orbits", "--group", "Z^2", "--level", "2"],
        vec!["restrict", "--group", "Z^2", "--subgroup", "e1", "--radius", "4", "--subradius", "2"],
        vec!["export", "--group", "Z", "--radius", "3", "--format", "dot"],
        vec!["export", "--group", "F2", "--radius", "3", "--format", "json"],
        vec!["verify", "--group", "KB", "--radius", "5", "--cases", "200", "--seed", "9"],
    ];
    for args in &commands {
        let mut outputs = Vec::new();
        for jobs in ["1", "4"] {
            let out = Command::new(bin)
                .args(["--jobs", jobs])
                .args(args)
                .output()
                .map_err(|e| e.to_string())?;
            outputs.push((out.status.code(), out.stdout));
        }
        check(outputs[0] == outputs[1], format!("`{}` differs between --jobs 1 and 4", args.join(" ")))?;
        check(!outputs[0].1.is_empty(), format!("`{}` printed nothing", args.join(" ")))?;
    }
    Ok(format!("{} commands byte-identical for --jobs 1 and 4", commands.len()))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("oracle equivalence", oracle_equivalence),
        ("exact counts", exact_counts),
        ("dichotomy verdicts", dichotomy_echo),
        ("property suites", property_suites),
        ("restriction continuity", restriction_continuity),
        ("derivative fixed points", derivative_traces),
        ("determinism across --jobs", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
