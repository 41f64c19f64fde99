use std::path::Path;
use std::process::{Command, Output};

fn intflow(args: &[&str], config_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_intflow"));
    cmd.args(args).env_remove("INTFLOW_CONFIG");
    if let Some(p) = config_env {
        cmd.env("INTFLOW_CONFIG", p);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn exit_codes_follow_the_contract() {
    assert_eq!(
        code(&intflow(
            &["rotnum", "--map", "lyness", "--a", "1", "--seed", "1,1"],
            None
        )),
        0
    );
    assert_eq!(
        code(&intflow(
            &[
                "verify",
                "--map",
                "todd",
                "--mu",
                "xyz",
                "--measure-samples",
                "0"
            ],
            None
        )),
        1
    );
    assert_eq!(code(&intflow(&["verify", "--map", "unknown"], None)), 2);
    assert_eq!(
        code(&intflow(
            &["rotnum", "--map", "lyness", "--seed", "-1,2"],
            None
        )),
        3
    );
    let short = [
        "rotnum",
        "--map",
        "lyness",
        "--seed",
        "1,1",
        "--set",
        "integrator.horizon=0.5",
    ];
    assert_eq!(code(&intflow(&short, None)), 4);
    assert_eq!(
        code(&intflow(
            &["rotnum", "--map", "tilde_lyness", "--seed", "0.7,1.3"],
            None
        )),
        5
    );
}

#[test]
fn rotnum_reports_rho_and_multiplicity() {
    let o = intflow(
        &[
            "rotnum",
            "--map",
            "lyness",
            "--a",
            "1",
            "--seed",
            "1,1",
            "--birkhoff",
            "10000",
        ],
        None,
    );
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("h1,seed1,seed2,T,tau,rho,m,res_mu,res_X,res_V,status")
    );
    let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((cols[5].parse::<f64>().unwrap() - 0.2).abs() < 1e-6);
    assert_eq!(cols[10], "ok");
    assert!(String::from_utf8_lossy(&o.stderr).contains("orbit average"));

    let o = intflow(
        &["rotnum", "--map", "todd", "--a", "1", "--seed", "1,2,3"],
        None,
    );
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    assert_eq!(line.split(',').nth(8), Some("2"));
}

#[test]
fn config_file_from_env_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    let csv = dir.path().join("rows.csv");
    std::fs::write(
        &cfg,
        format!(
            "[map]\nname = lyness\na = 1\nmu = xy\n\n[sweep]\ncount = 4\n\n[output]\ncsv = {}\n",
            csv.display()
        ),
    )
    .unwrap();
    let o = intflow(&["sweep"], Some(&cfg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("constant"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);

    // flags win over the file
    let o = intflow(&["sweep", "--a", "2", "--count", "6"], Some(&cfg));
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(
        out.contains("verdict: decreasing") || out.contains("verdict: increasing"),
        "{out}"
    );
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 7);

    std::fs::write(&cfg, "[map]\nname = lyness\n[sweep]\ncount = lots\n").unwrap();
    let o = intflow(&["sweep"], Some(&cfg));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn sweep_output_is_byte_identical_across_runs_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = [
        "sweep",
        "--map",
        "gumovski_mira",
        "--A",
        "1",
        "--B",
        "1.5",
        "--C",
        "0",
        "--count",
        "15",
    ];
    let mut args_a = base.to_vec();
    args_a.extend(["--out", a.to_str().unwrap()]);
    let mut args_b = base.to_vec();
    args_b.extend(["--out", b.to_str().unwrap(), "--sequential"]);
    let o = intflow(&args_a, None);
    assert_eq!(code(&o), 0);
    let summary = stdout(&o);
    assert!(summary.contains("endpoint limit"), "{summary}");
    assert!(summary.contains(" OK"), "{summary}");
    assert_eq!(code(&intflow(&args_b, None)), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn portraits_are_deterministic_svg() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.svg");
    let args = |p: &Path| {
        vec![
            "portrait".to_string(),
            "--map".into(),
            "gumovski_mira".into(),
            "--A".into(),
            "1".into(),
            "--B".into(),
            "3".into(),
            "--C".into(),
            "0".into(),
            "--seeds".into(),
            "6".into(),
            "--out".into(),
            p.to_str().unwrap().into(),
        ]
    };
    let run = |p: &Path| {
        let v = args(p);
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        intflow(&refs, None)
    };
    assert_eq!(code(&run(&a)), 0);
    let first = std::fs::read_to_string(&a).unwrap();
    assert_eq!(code(&run(&a)), 0);
    assert_eq!(first, std::fs::read_to_string(&a).unwrap());
    assert!(first.starts_with("<svg"));
    assert!(first.matches("<path").count() >= 5);
    assert!(first.contains("<circle"));

    // a seed exactly at the center cannot be traced and is listed, not fatal
    let o = intflow(
        &[
            "portrait",
            "--map",
            "lyness",
            "--a",
            "1",
            "--seeds",
            "2",
            "--ray",
            "1.6180339887498949,1.6180339887498949;3,3",
        ],
        None,
    );
    assert_eq!(code(&o), 0);
    let svg = stdout(&o);
    assert!(
        svg.contains("skipped seeds"),
        "{}",
        &svg[..svg.len().min(400)]
    );

    let o = intflow(
        &[
            "portrait",
            "--map",
            "todd",
            "--axes",
            "0,2",
            "--seeds",
            "3",
            "--out",
            a.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(&a)
        .unwrap()
        .contains("coordinates (1, 3)"));
}
