use tdps_core::channel::ChannelMatrix;
use tdps_core::combiner::CombinerConfig;
use tdps_core::pipeline::Scenario;
use tdps_core::sim::{gain_profile, mean_amplitude};
use tdps_core::td_search::{decimated_bins, search_delays, DelayGrid};

#[test]
fn delay_search_from_oracle_phases_approaches_pdf() {
    let scn = Scenario::reference(16, 1).unwrap();
    let bins = decimated_bins(scn.cfg.num_subcarriers);
    let h = scn.channel.select_bins(&bins).unwrap();
    let cb = scn.codebook();
    let theta = scn.ps_only_oracle().unwrap().theta;

    let res = search_delays(
        &theta,
        |cc| Ok(gain_profile(cc, &h, &scn.cfg)?.per_subcarrier),
        &scn.geom,
        &scn.cfg,
        &cb,
        &DelayGrid::default(),
    )
    .unwrap();
    let pdf = mean_amplitude(&gain_profile(&scn.pdf_oracle().unwrap(), &h, &scn.cfg).unwrap().per_subcarrier);
    let gap_db = 20.0 * (res.best_score / pdf).log10();
    assert!(gap_db >= -1.0, "gap {gap_db} dB");
    assert!(res.best_score > res.ps_only_score);
}

#[test]
fn text_formats_round_trip_through_files() {
    let mut scn = Scenario::reference(8, 2).unwrap();
    scn.cfg.num_subcarriers = 64;
    let scn = Scenario::new(scn.cfg.clone(), scn.geom, scn.ue, vec![1.0; 64]).unwrap();
    let dir = tempfile_dir();

    let path = dir.join("channel.txt");
    std::fs::write(&path, scn.channel.to_text()).unwrap();
    let back = ChannelMatrix::from_text(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, scn.channel);

    let cc = scn.pdf_oracle().unwrap();
    let cb = scn.codebook();
    let path = dir.join("combiner.txt");
    std::fs::write(&path, cc.to_text(&cb).unwrap()).unwrap();
    let (cc2, cb2) = CombinerConfig::from_text(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(cb2, cb);
    assert_eq!(cc2.theta, cc.theta);
    // delays are stored at picosecond resolution with six decimals
    for (a, b) in cc.tau.iter().zip(&cc2.tau) {
        assert!((a - b).abs() <= 1e-18);
    }
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("tdps-core-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
