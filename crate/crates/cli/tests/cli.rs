mod common;

use common::*;
use std::fs;

fn write_groups(dir: &std::path::Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("groups.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn comonotone_simulation_has_equal_columns() {
    let out = ok_text(&[
        "simulate",
        "--family",
        "comonotone",
        "--dims",
        "1,1",
        "--n",
        "5",
        "--seed",
        "3",
    ]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["x1", "y1"]);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[0] == r[1]));
}

#[test]
fn simulate_rejects_bad_flag_combinations() {
    let base = ["simulate", "--n", "5", "--seed", "1"];
    let with = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        code(&a)
    };
    assert_eq!(
        with(&["--family", "comonotone", "--theta", "2", "--dims", "1,1"]),
        2
    );
    assert_eq!(with(&["--family", "clayton", "--dims", "2,2"]), 2);
    assert_eq!(with(&["--family", "clayton", "--theta", "2"]), 2);
    assert_eq!(
        with(&["--family", "clayton", "--theta", "2", "--tau", "0.5", "--dims", "2,2"]),
        2
    );
    assert_eq!(
        with(&["--family", "clayton", "--theta", "-3", "--dims", "2,2"]),
        2
    );
    assert_eq!(with(&["--family", "comonotone", "--dim", "3"]), 2);
}

#[test]
fn simulate_margins_and_single_group() {
    let out = ok_text(&[
        "simulate",
        "--family",
        "gumbel",
        "--tau",
        "0.5",
        "--dim",
        "3",
        "--n",
        "50",
        "--seed",
        "9",
        "--margin",
        "exponential",
    ]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["x1", "x2", "x3"]);
    assert_eq!(rows.len(), 50);
    for r in &rows {
        for v in r {
            assert!(v.parse::<f64>().unwrap() > 0.0);
        }
    }
}

#[test]
fn tau_is_converted_to_theta() {
    let v = ok_json(&[
        "kendall",
        "--family",
        "gumbel",
        "--tau",
        "0.5",
        "--dims",
        "2",
        "--mode",
        "univariate",
        "--at",
        "0.3",
    ]);
    assert!((v["theta"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let v = ok_json(&[
        "kendall",
        "--family",
        "clayton",
        "--tau",
        "0.5",
        "--dims",
        "2",
        "--mode",
        "univariate",
        "--at",
        "0.3",
    ]);
    assert!((v["theta"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn kendall_univariate_independence() {
    let v = ok_json(&[
        "kendall",
        "--family",
        "independence",
        "--dims",
        "2",
        "--mode",
        "univariate",
        "--at",
        "0.5",
    ]);
    let k = v["points"][0]["value"].as_f64().unwrap();
    // t - t ln t at t = 1/2
    assert!((k - (0.5 + 0.5 * 2f64.ln())).abs() < 1e-12, "{k}");
}

#[test]
fn kendall_joint_of_scalars_is_the_copula_diagonal() {
    for t in ["0.2", "0.5", "0.9"] {
        let at = format!("{t},{t}");
        let v = ok_json(&[
            "kendall", "--family", "clayton", "--theta", "2", "--dims", "1,1", "--mode", "joint",
            "--at", &at,
        ]);
        let t: f64 = t.parse().unwrap();
        let expect = (2.0 * t.powi(-2) - 1.0).powf(-0.5);
        let got = v["points"][0]["value"].as_f64().unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }
}

#[test]
fn kendall_grid_csv_and_sample() {
    let out = ok_text(&[
        "kendall", "--family", "clayton", "--theta", "2", "--dims", "2,2", "--mode", "copula",
        "--grid", "5", "--format", "csv",
    ]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["u1", "u2", "value"]);
    assert_eq!(rows.len(), 25);

    let out = ok_text(&[
        "kendall", "--family", "gumbel", "--tau", "0.5", "--dims", "2,2", "--mode", "sample",
        "--n", "1000", "--seed", "5",
    ]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["u1", "u2"]);
    assert_eq!(rows.len(), 1000);
    for col in 0..2 {
        let mut u: Vec<f64> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
        u.sort_by(f64::total_cmp);
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, v)| {
                (v - i as f64 / 1000.0)
                    .abs()
                    .max(((i + 1) as f64 / 1000.0 - v).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.05, "KS {ks}");
    }
}

#[test]
fn kendall_usage_errors() {
    assert_eq!(
        code(&["kendall", "--family", "clayton", "--theta", "2", "--dims", "2", "--mode", "joint"]),
        2
    );
    assert_eq!(
        code(&[
            "kendall", "--family", "clayton", "--theta", "2", "--dims", "2,2", "--mode", "sample"
        ]),
        2
    );
    assert_eq!(
        code(&[
            "kendall",
            "--family",
            "independence",
            "--theta",
            "2",
            "--dims",
            "2",
            "--mode",
            "univariate"
        ]),
        2
    );
    assert_eq!(
        code(&[
            "kendall", "--family", "clayton", "--theta", "2", "--dims", "40,40", "--mode", "joint",
            "--at", "0.5,0.5"
        ]),
        2
    );
}

#[test]
fn measure_comonotone_spearman_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let (data, groups) = simulate(
        dir.path(),
        "co",
        &[
            "--family",
            "comonotone",
            "--dims",
            "2,3",
            "--n",
            "200",
            "--seed",
            "1",
        ],
    );
    let v = ok_json(&[
        "measure",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&groups),
        "--group-a",
        "X",
        "--group-b",
        "Y",
        "--measure",
        "spearman",
    ]);
    assert_eq!(v["schema"], "vecdep/1");
    assert_eq!(v["estimate"].as_f64().unwrap(), 1.0);
    assert_eq!(v["n"], 200);
    assert_eq!(v["k"], 200);
    assert_eq!(v["method"], "none");
}

#[test]
fn measure_routes_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let (data, groups) = simulate(
        dir.path(),
        "c",
        &[
            "--family", "clayton", "--theta", "1", "--dims", "2,2", "--n", "60", "--seed", "2",
        ],
    );
    let base = [
        "measure",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&groups),
        "--group-a",
        "X",
        "--group-b",
        "Y",
    ];

    let a = concat(&base, &["--collapse", "distance", "--ci", "asymptotic"]);
    let v = ok_json(&a);
    assert_eq!(v["k"], 60 * 59 / 2);
    assert_eq!(v["collapse"]["metric"]["name"], "euclidean");
    let ci = v["ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() <= v["estimate"].as_f64().unwrap());

    let a = concat(
        &base,
        &[
            "--measure",
            "tau",
            "--ci",
            "asymptotic",
            "--collapse",
            "maximum",
        ],
    );
    assert_eq!(ok_json(&a)["method"], "asymptotic");

    let a = concat(&base, &["--collapse", "pit", "--ci", "asymptotic"]);
    let out = vecdep(&a);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bootstrap required for PIT"));

    let a = concat(
        &base,
        &[
            "--collapse",
            "pit",
            "--ci",
            "bootstrap",
            "--bootstrap-reps",
            "200",
            "--seed",
            "4",
        ],
    );
    let v = ok_json(&a);
    assert_eq!(v["method"], "bootstrap");
    assert_eq!(v["collapse"]["kind"], "pit");

    let a = concat(&base, &["--measure", "spearman", "--ci", "asymptotic"]);
    assert_eq!(code(&a), 2);
    let a = concat(&base, &["--level", "1.5", "--ci", "asymptotic"]);
    assert_eq!(code(&a), 2);
    let a = concat(
        &base,
        &["--collapse", "kernel", "--collapse-params", "not json"],
    );
    assert_eq!(code(&a), 2);
    let a = concat(
        &base,
        &[
            "--collapse",
            "distance",
            "--collapse-params",
            r#"{"metric":{"name":"minkowski","r":2}}"#,
            "--measure",
            "tail-upper",
        ],
    );
    let v = ok_json(&a);
    assert_eq!(v["collapse"]["metric"]["r"], 2.0);
    assert!(v["tail_k"].as_u64().unwrap() > 0);
}

#[test]
fn collapse_outputs_one_based_indices() {
    let dir = tempfile::tempdir().unwrap();
    let (data, groups) = simulate(
        dir.path(),
        "i",
        &[
            "--family",
            "independent-groups",
            "--dims",
            "2,2",
            "--n",
            "6",
            "--seed",
            "8",
        ],
    );
    let out = ok_text(&[
        "collapse",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&groups),
        "--group",
        "X",
        "--collapse",
        "maximum",
    ]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["index", "value"]);
    assert_eq!(rows.first().unwrap()[0], "1");
    assert_eq!(rows.len(), 6);

    let out = ok_text(&[
        "collapse",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&groups),
        "--group",
        "Y",
        "--collapse",
        "multivariate-rank",
    ]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["i", "j", "value", "reverse"]);
    assert_eq!(rows.len(), 15);
    assert_eq!(&rows[0][..2], ["1", "2"]);
    assert_eq!(&rows[14][..2], ["5", "6"]);
}

#[test]
fn assess_panel_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (data, groups) = simulate(
        dir.path(),
        "s",
        &[
            "--family", "clayton", "--theta", "2", "--dim", "4", "--n", "10", "--seed", "6",
        ],
    );
    let two = write_groups(
        dir.path(),
        r#"{"groups":[{"name":"A","columns":["x1","x2"]},{"name":"B","columns":["x3","x4"]}]}"#,
    );
    let out = ok_text(&[
        "assess",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&two),
    ]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["group_a", "group_b", "index", "u_a", "u_b"]);
    assert_eq!(rows.len(), 10);
    let out = ok_text(&[
        "assess",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&two),
        "--collapse",
        "distance",
    ]);
    assert_eq!(csv_rows(&out).1.len(), 45);

    let four = dir.path().join("four.json");
    fs::write(
        &four,
        r#"{"groups":[{"name":"A","columns":["x1"]},{"name":"B","columns":["x2"]},{"name":"C","columns":["x3"]},{"name":"D","columns":["x4"]}]}"#,
    )
    .unwrap();
    let v = ok_json(&[
        "assess",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&four),
        "--format",
        "json",
    ]);
    assert_eq!(v["panels"].as_array().unwrap().len(), 6);
    assert_eq!(v["panels"][0]["group_a"], "A");
    assert_eq!(v["panels"][5]["group_b"], "D");
    let svg = ok_text(&[
        "assess",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&four),
        "--format",
        "svg",
    ]);
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert_eq!(svg.matches("<circle").count(), 6 * 10);
    let _ = groups;
}

#[test]
fn rolling_window_counts_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (data, groups) = simulate(
        dir.path(),
        "r",
        &[
            "--family", "clayton", "--theta", "1", "--dims", "2,2", "--n", "100", "--seed", "3",
        ],
    );
    let base = [
        "rolling",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&groups),
        "--group-a",
        "X",
        "--group-b",
        "Y",
    ];
    let with = |extra: &[&'static str]| concat(&base, extra);
    let out = String::from_utf8(ok(&with(&["--window", "30", "--step", "30"]))).unwrap();
    let (header, rows) = csv_rows(&out);
    assert_eq!(
        header,
        ["window_end", "estimate", "std_error", "ci_lo", "ci_hi"]
    );
    assert_eq!(rows.len(), 100 / 30);
    assert_eq!(
        rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(),
        ["30", "60", "90"]
    );
    assert!(rows.iter().all(|r| r[2].is_empty()));

    let out = String::from_utf8(ok(&with(&[
        "--window",
        "40",
        "--step",
        "7",
        "--ci",
        "asymptotic",
    ])))
    .unwrap();
    let rows = csv_rows(&out).1;
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| !r[3].is_empty()));

    assert_eq!(code(&with(&["--window", "9"])), 2);
    assert_eq!(code(&with(&["--window", "101"])), 3);
    assert_eq!(code(&with(&["--window", "20", "--step", "0"])), 2);
}

#[test]
fn data_errors_name_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "a,b\n1,2\n3,oops\n").unwrap();
    let groups = write_groups(
        dir.path(),
        r#"{"groups":[{"name":"X","columns":["a"]},{"name":"Y","columns":["b"]}]}"#,
    );
    let args = [
        "measure",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&groups),
        "--group-a",
        "X",
        "--group-b",
        "Y",
    ];
    let out = vecdep(&args);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2") && err.contains("column 2"), "{err}");

    fs::write(&data, "a,b\n1,2\n3,\n").unwrap();
    assert_eq!(code(&args), 3);

    fs::write(&data, "a,b\n1,2\n3,4\n5,6\n").unwrap();
    let bad_groups = write_groups(
        dir.path(),
        r#"{"groups":[{"name":"X","columns":["a"]},{"name":"Y","columns":["zz"]}]}"#,
    );
    assert_eq!(code(&args), 3);
    let _ = bad_groups;
    assert_eq!(
        code(&[
            "measure",
            "--input",
            "/nonexistent.csv",
            "--groups",
            path_str(&groups),
            "--group-a",
            "X",
            "--group-b",
            "Y"
        ]),
        3
    );
}

#[test]
fn degenerate_input_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("flat.csv");
    fs::write(&data, "a,b\n1,2\n1,3\n1,4\n1,5\n").unwrap();
    let groups = write_groups(
        dir.path(),
        r#"{"groups":[{"name":"X","columns":["a"]},{"name":"Y","columns":["b"]}]}"#,
    );
    let out = vecdep(&[
        "measure",
        "--input",
        path_str(&data),
        "--groups",
        path_str(&groups),
        "--group-a",
        "X",
        "--group-b",
        "Y",
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn csv_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = simulate(
        dir.path(),
        "n",
        &[
            "--family", "clayton", "--theta", "3", "--dims", "2,2", "--n", "40", "--seed", "12",
            "--margin", "normal",
        ],
    );
    let text = fs::read_to_string(&data).unwrap();
    let table = vecdep_cli::io::parse_csv(&text).unwrap();
    let mut w = vecdep_cli::io::csv_writer();
    w.write_record(&table.headers).unwrap();
    for row in table.values.rows() {
        w.write_record(row.iter().map(|v| vecdep_cli::io::fmt_f64(*v)))
            .unwrap();
    }
    let again = String::from_utf8(vecdep_cli::io::finish_csv(w).unwrap()).unwrap();
    assert_eq!(again, text);
}

#[test]
fn thread_count_is_validated() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_vecdep"))
        .args([
            "kendall",
            "--family",
            "clayton",
            "--theta",
            "2",
            "--dims",
            "2",
            "--mode",
            "univariate",
        ])
        .env("VECDEP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_vecdep"))
        .args([
            "kendall",
            "--family",
            "clayton",
            "--theta",
            "2",
            "--dims",
            "2",
            "--mode",
            "univariate",
        ])
        .env("VECDEP_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
}
