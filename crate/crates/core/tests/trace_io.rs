use boost_core::timeseries::{load_trace, read_trace, synth_trace, windows, HourlyTrace, TraceFormat};
use proptest::prelude::*;

#[test]
fn synthetic_year_round_trips_through_csv() {
    let trace = synth_trace(0, 8760).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("year.csv");
    trace.save(&path).unwrap();
    let back = load_trace(&path, &TraceFormat::default()).unwrap();
    assert_eq!(back, trace);
}

#[test]
fn synthetic_year_shape() {
    let t = synth_trace(0, 8760).unwrap();
    assert_eq!(t.len(), 8760);
    let a = t.pv_availability();
    let night = (0..365).all(|d| a[24 * d] == 0.0 && a[24 * d + 23] == 0.0);
    assert!(night);
    assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(t.load_kw().iter().all(|&l| l > 0.0));
    let mut tiers: Vec<f64> = t.grid_price().to_vec();
    tiers.sort_by(f64::total_cmp);
    tiers.dedup();
    assert_eq!(tiers.len(), 2);
    // Summer days carry more PV energy than winter days.
    let day_energy = |d: usize| a[24 * d..24 * d + 24].iter().sum::<f64>();
    let summer: f64 = (160..190).map(day_energy).sum();
    let winter: f64 = (0..30).map(day_energy).sum();
    assert!(summer > winter);
}

#[test]
fn diesel_price_column_is_optional() {
    let csv = "# comment line\nhour,load_kw,grid_price,pv_availability,diesel_price\n0,10,0.1,0,0.25\n1,12,0.2,0.1,0.35\n";
    let t = read_trace(csv.as_bytes(), &TraceFormat::default()).unwrap();
    assert_eq!(t.diesel_price(), Some(&[0.25, 0.35][..]));
    let mut out = Vec::new();
    t.write_csv(&mut out).unwrap();
    assert_eq!(read_trace(out.as_slice(), &TraceFormat::default()).unwrap(), t);
}

#[test]
fn custom_column_names() {
    let csv = "h,demand,tariff,pv\n0,1,0.1,0.2\n";
    let fmt = TraceFormat {
        hour: "h".into(),
        load: "demand".into(),
        grid_price: "tariff".into(),
        availability: "pv".into(),
        ..TraceFormat::default()
    };
    let t = read_trace(csv.as_bytes(), &fmt).unwrap();
    assert_eq!(t.pv_availability(), &[0.2]);
}

proptest! {
    #[test]
    fn csv_round_trip(rows in prop::collection::vec((0.0..1e4f64, 0.0..2.0f64, 0.0..=1.0f64), 1..50)) {
        let load = rows.iter().map(|r| r.0).collect();
        let price = rows.iter().map(|r| r.1).collect();
        let avail = rows.iter().map(|r| r.2).collect();
        let t = HourlyTrace::new(load, price, avail, None).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        prop_assert_eq!(read_trace(out.as_slice(), &TraceFormat::default()).unwrap(), t);
    }

    #[test]
    fn windows_partition_hours(hours in 1usize..2000, len in 1usize..400) {
        let w = windows(hours, len).unwrap();
        prop_assert_eq!(w.len(), hours.div_ceil(len));
        let mut next = 0;
        for win in &w {
            prop_assert_eq!(win.start, next);
            prop_assert!(win.len >= 1 && win.len <= len);
            next += win.len;
        }
        prop_assert_eq!(next, hours);
    }

    #[test]
    fn same_seed_same_trace(seed in any::<u64>()) {
        prop_assert_eq!(synth_trace(seed, 100).unwrap(), synth_trace(seed, 100).unwrap());
    }
}
