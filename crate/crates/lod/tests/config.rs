use std::path::{Path, PathBuf};

use lod::config::{parse_config, read_config, write_config, CoeffSource, ExperimentConfig, Problem};
use lod::Error;

const PAPER_SCHEDULE: &str = "\
# five coarse levels on a 128x128 reference mesh
problem = linear
fine_level = 7
coarse_levels = 2, 3, 4, 5, 6
k_schedule = 1, 2, 2, 3, 4
tau = 0.01
n_steps = 100
coefficient = random
coeff_grid_level = 6
coeff_lo = 0.1
coeff_hi = 1e5
coeff_seed = 7
output = out/report.csv
";

fn parse(text: &str) -> lod::Result<ExperimentConfig> {
    parse_config(text, Path::new("test.conf"), Path::new("/base"))
}

fn parse_error_line(text: &str) -> usize {
    match parse(text) {
        Err(Error::Parse { line, .. }) => line,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn paper_schedule_parses() {
    let c = parse(PAPER_SCHEDULE).unwrap();
    assert_eq!(c.problem, Problem::Linear);
    assert_eq!(c.fine_level, 7);
    assert_eq!(c.coarse_levels, vec![2, 3, 4, 5, 6]);
    assert_eq!(c.k_schedule, vec![1, 2, 2, 3, 4]);
    assert_eq!(c.tau, 0.01);
    assert_eq!(c.n_steps, 100);
    assert_eq!(
        c.coefficient,
        CoeffSource::Random {
            grid_level: 6,
            lo: 0.1,
            hi: 1e5,
            seed: 7
        }
    );
    assert_eq!(c.output, PathBuf::from("/base/out/report.csv"));
    assert!(c.cache_dir.is_none());
}

#[test]
fn key_order_does_not_matter() {
    let mut lines: Vec<&str> = PAPER_SCHEDULE.lines().collect();
    lines.reverse();
    assert_eq!(parse(&lines.join("\n")).unwrap(), parse(PAPER_SCHEDULE).unwrap());
}

#[test]
fn text_round_trip() {
    let mut c = ExperimentConfig::desk_linear(CoeffSource::Constant(2.5));
    c.output = PathBuf::from("/tmp/x.csv");
    c.problem = Problem::Semilinear;
    c.cache_dir = Some(PathBuf::from("/tmp/cache"));
    c.step_tol = 1e-11;
    assert_eq!(parse(&c.to_text()).unwrap(), c);

    c.coefficient = CoeffSource::File(PathBuf::from("/data/field.txt"));
    assert_eq!(parse(&c.to_text()).unwrap(), c);
}

#[test]
fn file_round_trip_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::desk_linear(CoeffSource::Constant(1.0));
    c.output = dir.path().join("r.csv");
    let path = dir.path().join("nested").join("exp.conf");
    write_config(&c, &path).unwrap();
    assert_eq!(read_config(&path).unwrap(), c);

    std::fs::write(&path, PAPER_SCHEDULE).unwrap();
    let c = read_config(&path).unwrap();
    assert_eq!(c.output, dir.path().join("nested/out/report.csv"));
}

#[test]
fn errors_carry_line_numbers() {
    let unknown = PAPER_SCHEDULE.replace("tau = 0.01", "tua = 0.01");
    assert_eq!(parse_error_line(&unknown), 6);

    let dup = format!("{PAPER_SCHEDULE}n_steps = 5\n");
    assert_eq!(parse_error_line(&dup), 14);

    let bad_number = PAPER_SCHEDULE.replace("n_steps = 100", "n_steps = lots");
    assert_eq!(parse_error_line(&bad_number), 7);

    let no_eq = PAPER_SCHEDULE.replace("tau = 0.01", "tau 0.01");
    assert_eq!(parse_error_line(&no_eq), 6);

    let problem = PAPER_SCHEDULE.replace("= linear", "= quadratic");
    assert_eq!(parse_error_line(&problem), 2);
}

#[test]
fn missing_key_is_reported() {
    let text = PAPER_SCHEDULE.replace("tau = 0.01\n", "");
    let err = parse(&text).unwrap_err().to_string();
    assert!(err.contains("tau"), "{err}");
}

#[test]
fn inconsistent_configs_are_rejected() {
    let cases = [
        PAPER_SCHEDULE.replace("k_schedule = 1, 2, 2, 3, 4", "k_schedule = 1, 2"),
        PAPER_SCHEDULE.replace("coarse_levels = 2, 3, 4, 5, 6", "coarse_levels = 2, 3, 4, 5, 7"),
        PAPER_SCHEDULE.replace("coeff_grid_level = 6", "coeff_grid_level = 8"),
        PAPER_SCHEDULE.replace("coeff_lo = 0.1", "coeff_lo = 1e6"),
        PAPER_SCHEDULE.replace("tau = 0.01", "tau = -1"),
        PAPER_SCHEDULE.replace("fine_level = 7", "fine_level = 11"),
    ];
    for text in cases {
        assert!(parse(&text).is_err(), "accepted:\n{text}");
    }
}

#[test]
fn missing_config_file_is_an_io_error() {
    let err = read_config(Path::new("/nonexistent/exp.conf")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err:?}");
}
