//! Whatever parses must solve or fail cleanly; a finite answer must respect
//! every constraint.

#![no_main]
use libfuzzer_sys::fuzz_target;
use sinr_region::{parse_channel_spec, ChannelSource, Direction, Solver};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = parse_channel_spec(text) else {
        return;
    };
    let n = spec.source.users();
    if n > 8 {
        return;
    }
    let d = Direction::uniform(n).unwrap();
    let solver = Solver::default();
    let report = match &spec.source {
        ChannelSource::Static(ch) => solver.multi_constrained_max_sinr(ch, &d, &spec.constraints),
        ChannelSource::TimeVarying(tv) if tv.state_count() <= 4 => solver.tv_multi(tv, &d, &spec.constraints),
        ChannelSource::TimeVarying(_) => return,
    };
    let Ok(report) = report else {
        return;
    };
    assert!(report.gamma_star > 0.0, "{}", report.gamma_star);
    if let (Some(p), ChannelSource::Static(_)) = (&report.power, &spec.source) {
        assert!(p.iter().all(|x| *x >= 0.0));
        for c in &spec.constraints {
            let used = c.total_power(p);
            assert!(used <= c.bound() * (1.0 + 1e-6), "{used} > {}", c.bound());
        }
    }
});
