//! End-to-end checks of the study pipeline: tiny studies run through the
//! public driver, CSV output is byte-deterministic and worker-count
//! independent, profiles have the advertised shape, and config files round
//! trip strictly.

use std::fs;
use subdiffopt::{solve_ocp, Bounds, Mesh1D, OcpProblem, Scheme, TimeGrid};
use subdiffopt_cli::cases::ExampleCase;
use subdiffopt_cli::config::{Scale, StudyConfig};
use subdiffopt_cli::emit::{emit_csv, emit_profiles};
use subdiffopt_cli::study::{run_study, run_temporal_studies, StudyKind, Variable};

fn tiny_temporal_cfg() -> StudyConfig {
    let mut cfg = StudyConfig::preset(StudyKind::TemporalL2, ExampleCase::B, Scale::Desk);
    cfg.alphas = vec![0.5];
    cfg.levels = vec![8, 16];
    cfg.reference = 64;
    cfg.cells = 6;
    cfg
}

#[test]
fn tiny_temporal_study_has_expected_shape() {
    let cfg = tiny_temporal_cfg();
    let (l2, linf) = run_temporal_studies(&cfg, 1).unwrap();
    for study in [&l2, &linf] {
        assert_eq!(study.levels, vec![8, 16]);
        assert_eq!(study.rows.len(), 3); // one alpha x (u, q, z)
        for var in [Variable::State, Variable::Control, Variable::Adjoint] {
            let row = study.row(0.5, var).unwrap();
            assert_eq!(row.errors.len(), 2);
            assert_eq!(row.eocs.len(), 1);
            assert!(row.errors.iter().all(|e| e.is_finite() && *e > 0.0));
            // Halving the step must shrink the error.
            assert!(row.errors[1] < row.errors[0]);
        }
    }
}

#[test]
fn csv_output_is_deterministic_and_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_temporal_cfg();
    let mut bytes = Vec::new();
    for (i, workers) in [1usize, 1, 4].iter().enumerate() {
        let study = run_study(&cfg, *workers).unwrap();
        let path = dir.path().join(format!("t{i}.csv"));
        emit_csv(&study, &cfg, &path).unwrap();
        bytes.push(fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1], "reruns must be byte-identical");
    assert_eq!(bytes[0], bytes[2], "worker count must not change output");
    let text = String::from_utf8(bytes[0].clone()).unwrap();
    assert!(text.starts_with("# study: temporal-l2\n"));
    assert!(text.contains("alpha,variable,8,16,eoc"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn profiles_have_one_row_per_node_and_slot() {
    let n = 5usize;
    let m = 6usize;
    let prob = OcpProblem {
        grid: TimeGrid::new(n, 0.1).unwrap(),
        mesh: Mesh1D::new(m).unwrap(),
        scheme: Scheme::L1,
        alpha: 0.5,
        gamma: 1.0,
        bounds: Bounds {
            lower: 0.0,
            upper: 0.05,
        },
        f: &|_x, _t| 0.0,
        target: &|x: f64, t: f64| t.exp() * x * (1.0 - x),
    };
    let sol = solve_ocp(&prob, 1e-10, 400, 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_profiles(dir.path(), &prob.mesh, &prob.grid, &sol).unwrap();
    let rows = |name: &str| {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,t,value"), "{name} missing header");
        lines.count()
    };
    assert_eq!(rows("profile_u.csv"), (m - 1) * (n + 1));
    assert_eq!(rows("profile_z.csv"), (m - 1) * (n + 1));
    assert_eq!(rows("profile_q.csv"), (m - 1) * n);
}

#[test]
fn config_file_overrides_preset_and_rejects_bad_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("study.cfg");
    fs::write(
        &path,
        "# comment line\n\
         study = temporal-linf\n\
         example = b\n\
         scale = desk\n\
         scheme = cq\n\
         alphas = 0.3, 0.7\n\
         levels = 10, 20, 40\n\
         reference = 320\n\
         cells = 12\n\
         gamma = 0.5\n\
         final_time = 0.2\n",
    )
    .unwrap();
    let cfg = StudyConfig::from_file(&path).unwrap();
    assert_eq!(cfg.study, StudyKind::TemporalLinf);
    assert_eq!(cfg.example, ExampleCase::B);
    assert_eq!(cfg.scheme, Scheme::BeCq);
    assert_eq!(cfg.alphas, vec![0.3, 0.7]);
    assert_eq!(cfg.levels, vec![10, 20, 40]);
    assert_eq!(cfg.reference, 320);
    assert_eq!(cfg.cells, 12);
    assert_eq!(cfg.gamma, 0.5);
    assert_eq!(cfg.final_time, 0.2);
    // Untouched keys keep their preset values.
    assert_eq!(cfg.lower, 0.0);
    assert_eq!(cfg.upper, 0.05);

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "study = spatial\nexample = a\nmesh = 7\n").unwrap();
    assert!(
        StudyConfig::from_file(&bad).is_err(),
        "unknown key accepted"
    );
    fs::write(&bad, "study = spatial\nstudy = spatial\nexample = a\n").unwrap();
    assert!(
        StudyConfig::from_file(&bad).is_err(),
        "repeated key accepted"
    );
}
