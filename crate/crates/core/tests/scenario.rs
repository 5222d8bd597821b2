use rta_core::filters::{FilterKind, LatchConfig};
use rta_core::sim::{
    default_config, emit_plot_data, read_records, run_scenario, write_csv, ScenarioConfig, Termination,
};

#[test]
fn identical_configs_give_identical_records() {
    for kind in FilterKind::RTA {
        let mut c = default_config();
        c.filter = kind;
        c.duration = 400;
        let a = run_scenario(&c).unwrap().records;
        let b = run_scenario(&c).unwrap().records;
        let strip = |rs: &[rta_core::sim::StepRecord]| rs.iter().map(|r| r.without_timing()).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b), "{kind}");
    }
}

#[test]
fn filtered_runs_dock() {
    for kind in FilterKind::RTA {
        let mut c = default_config();
        c.filter = kind;
        let s = run_scenario(&c).unwrap().summary;
        assert_eq!(s.termination, Termination::Docked, "{kind}");
        assert!(!s.violates(), "{kind}: {:?}", s.min_phi);
    }
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    let mut c = default_config();
    c.filter = FilterKind::ImplicitOptimization;
    c.latch = Some(LatchConfig::default());
    c.save(&path).unwrap();
    assert_eq!(ScenarioConfig::load(&path).unwrap(), c);
}

// The unfiltered run leaves the speed-limit panel's safe region; a filtered
// one stays in every panel's safe region.
#[test]
fn plot_panels_show_the_boundary_crossing() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, crosses) in [(FilterKind::None, true), (FilterKind::ExplicitOptimization, false)] {
        let mut c = default_config();
        c.filter = kind;
        let recs = run_scenario(&c).unwrap().records;
        let csv = dir.path().join(format!("{kind}.csv"));
        write_csv(&csv, &recs).unwrap();
        let recs = read_records(&csv).unwrap();
        let out = dir.path().join(kind.as_str());
        let files = emit_plot_data(&recs, &c.safety, &out).unwrap();

        let mut rdr = csv::Reader::from_path(&files.speed_limit).unwrap();
        let mut outside = false;
        for row in rdr.records() {
            let row = row.unwrap();
            let v: f64 = row[2].parse().unwrap();
            let lim: f64 = row[3].parse().unwrap();
            outside |= v > lim;
        }
        for p in &files.velocity {
            let mut rdr = csv::Reader::from_path(p).unwrap();
            for row in rdr.records() {
                let row = row.unwrap();
                let v: f64 = row[2].parse().unwrap();
                outside |= v.abs() > c.safety.v_max;
            }
        }
        assert_eq!(outside, crosses, "{kind}");
    }
}
