use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use liesym::pointcloud::load_csv;

fn liesym(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liesym"))
        .current_dir(dir)
        .env_remove("LIESYM_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn gen_writes_the_requested_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = liesym(
        dir.path(),
        &["gen", "--system", "heat", "--n", "80", "--seed", "7", "-o", "heat.csv"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cloud = load_csv(dir.path().join("heat.csv")).unwrap();
    assert_eq!((cloud.n_points(), cloud.dim()), (6400, 3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("6400 rows"));
}

#[test]
fn fixed_constant_gives_a_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = liesym(
        dir.path(),
        &[
            "gen",
            "--system",
            "linear_ode",
            "--fix-c",
            "1",
            "--n",
            "50",
            "-o",
            "u.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    let cloud = load_csv(dir.path().join("u.csv")).unwrap();
    assert_eq!(cloud.layout().d(), 1);
    assert_eq!(cloud.n_points(), 50);
}

#[test]
fn gen_is_deterministic_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let out = liesym(
            dir.path(),
            &["gen", "--system", "transport", "--n", "20", "--seed", seed, "-o", name],
        );
        assert_eq!(code(&out), 0);
        fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(run("4", "a.csv"), run("4", "b.csv"));
    assert_ne!(run("4", "a.csv"), run("5", "c.csv"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&liesym(dir.path(), &["gen", "--n", "10"])), 1);
    assert_eq!(code(&liesym(dir.path(), &["gen", "--system", "wave"])), 1);
    assert_eq!(code(&liesym(dir.path(), &["converge", "--benchmark", "wave"])), 1);
    assert_eq!(code(&liesym(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&liesym(dir.path(), &["discover"])), 1);
    assert_eq!(code(&liesym(dir.path(), &["--help"])), 0);
    assert_eq!(code(&liesym(dir.path(), &["--version"])), 0);
}

#[test]
fn prolong_writes_jets_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    liesym(
        dir.path(),
        &[
            "gen",
            "--system",
            "linear_ode",
            "--fix-c",
            "1",
            "--n",
            "200",
            "-o",
            "u.csv",
        ],
    );
    let out = liesym(
        dir.path(),
        &[
            "prolong", "-i", "u.csv", "-p", "1", "-k", "10", "-l", "3", "-o", "u1.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lifted = load_csv(dir.path().join("u1.csv")).unwrap();
    assert_eq!((lifted.level(), lifted.dim()), (1, 3));
    // u = e^x, so u_x = u.
    let d = lifted.data();
    assert!((0..d.nrows()).all(|i| (d[(i, 2)] - d[(i, 1)]).abs() < 1e-3));
    let diag = fs::read_to_string(dir.path().join("u1.diagnostics.csv")).unwrap();
    assert!(diag.starts_with("level,row,status,condition,iterations,converged\n"));
    assert_eq!(diag.lines().count(), 201);

    let copy = liesym(dir.path(), &["prolong", "-i", "u.csv", "-p", "0", "-o", "u0.csv"]);
    assert_eq!(code(&copy), 0);
    assert_eq!(
        fs::read(dir.path().join("u.csv")).unwrap(),
        fs::read(dir.path().join("u0.csv")).unwrap()
    );

    // Y = C(4 + 1, 1) = 5 monomials need at least 5 neighbours.
    let small = liesym(dir.path(), &["prolong", "-i", "u.csv", "-p", "1", "-k", "4", "-l", "4"]);
    assert_eq!(code(&small), 1);
    assert!(String::from_utf8_lossy(&small.stderr).contains("stencil"));
}

#[test]
fn discover_reports_generators_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    liesym(
        dir.path(),
        &["gen", "--system", "linear_ode", "--n", "100", "-o", "family.csv"],
    );
    let out = liesym(dir.path(), &["discover", "-i", "family.csv", "-o", "run"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let printed = String::from_utf8_lossy(&out.stdout);
    assert_eq!(printed.lines().collect::<Vec<_>>(), ["∂x", "u ∂u"]);
    assert_eq!(
        fs::read_to_string(dir.path().join("run/generators.txt")).unwrap(),
        printed
    );
    let spectrum = fs::read_to_string(dir.path().join("run/spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 7);

    // Forcing an impossible threshold leaves an empty nullspace.
    let none = liesym(
        dir.path(),
        &["discover", "-i", "family.csv", "--policy", "threshold:1e-30"],
    );
    assert_eq!(code(&none), 2);
    assert!(none.stdout.is_empty());

    fs::write(dir.path().join("empty.csv"), "").unwrap();
    assert_eq!(code(&liesym(dir.path(), &["discover", "-i", "empty.csv"])), 1);
}

#[test]
fn converge_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &'static str| {
        vec![
            "converge",
            "--benchmark",
            "linear_ode_fixed",
            "--trials",
            "1",
            "--seed",
            "3",
            "--sizes",
            "80,160",
            "-o",
            name,
        ]
    };
    assert_eq!(code(&liesym(dir.path(), &args("a.csv"))), 0);
    assert_eq!(code(&liesym(dir.path(), &args("b.csv"))), 0);
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert!(a.starts_with("N,trials,mean_sin_theta,std,theory_rescaled,completed\n"));
    assert_eq!(a.lines().count(), 3);

    let timed = liesym(
        dir.path(),
        &[
            "converge",
            "--benchmark",
            "linear_ode_fixed",
            "--trials",
            "1",
            "--sizes",
            "80",
            "--timings",
        ],
    );
    assert!(String::from_utf8_lossy(&timed.stdout)
        .starts_with("N,trials,mean_sin_theta,std,theory_rescaled,runtime_s,completed\n"));
}

#[test]
fn heat_sweep_has_four_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = liesym(dir.path(), &["converge", "--benchmark", "heat", "--trials", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8_lossy(&out.stdout);
    let sizes: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(sizes, ["3136", "6400", "12769", "25600"]);
}

#[test]
fn config_files_layer_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.conf"),
        "# small transport grid\nbenchmark = transport\nsizes = 12\nseed = 9\n",
    )
    .unwrap();
    let out = liesym(
        dir.path(),
        &[
            "--config",
            "run.conf",
            "--save-config",
            "saved.conf",
            "gen",
            "-o",
            "t.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_csv(dir.path().join("t.csv")).unwrap().n_points(), 144);

    // Reloading the saved configuration reproduces the run byte for byte.
    let again = liesym(dir.path(), &["--config", "saved.conf", "gen", "-o", "t2.csv"]);
    assert_eq!(code(&again), 0);
    assert_eq!(
        fs::read(dir.path().join("t.csv")).unwrap(),
        fs::read(dir.path().join("t2.csv")).unwrap()
    );

    let flag = liesym(
        dir.path(),
        &["--config", "run.conf", "gen", "--n", "10", "-o", "t3.csv"],
    );
    assert_eq!(code(&flag), 0);
    assert_eq!(load_csv(dir.path().join("t3.csv")).unwrap().n_points(), 100);

    fs::write(dir.path().join("bad.conf"), "seed = 1\nbogus = 2\n").unwrap();
    let bad = liesym(dir.path(), &["--config", "bad.conf", "gen", "--system", "heat"]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 2"));
}
