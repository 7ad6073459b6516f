use motifstore::channel::ChannelParams;
use motifstore::config::RunConfig;
use motifstore::decode::Grouping;
use motifstore::layout::{LayoutMode, LayoutParams};
use motifstore::pipeline::encode_input;
use motifstore::prng::SplitMix64;

fn input(len: usize, seed: u64) -> Vec<u8> {
    let mut g = SplitMix64::new(seed);
    (0..len).map(|_| g.next_u64() as u8).collect()
}

fn small_cfg(mode: LayoutMode) -> RunConfig {
    RunConfig { layout: LayoutParams { data_columns_per_oligo: 12, obs_per_oe: 1, primer_len: 20, mode }, ..RunConfig::default() }
}

#[test]
fn zero_noise_round_trip_both_layouts() {
    let data = input(20_000, 1);
    for mode in [LayoutMode::Columnar, LayoutMode::RowBased] {
        let cfg = small_cfg(mode);
        let pool = encode_input(&data, &cfg).unwrap();
        let ch = ChannelParams { coverage: 1.0, error_rate: 0.0, ..cfg.channel.clone() };
        let reads = pool.sample(&ch).unwrap();
        assert_eq!(reads.len(), pool.oligos.len());
        for grouping in [Grouping::Oracle, Grouping::Lsh(cfg.cluster.clone())] {
            let out = pool.decode(&reads, &cfg, &grouping, None).unwrap();
            assert!(out.report.crc_match, "{mode:?} {grouping:?}");
            assert_eq!(out.bytes, data);
            let bad: Vec<_> = out.report.extents.iter().flat_map(|e| &e.blocks).filter(|b| b.erasures > 0).collect();
            assert!(bad.is_empty(), "{mode:?} {grouping:?} {bad:?} {:?}", out.report.extents.iter().map(|e| (e.clusters, e.dropout, e.index_conflicts, e.clusters_invalid_index)).collect::<Vec<_>>());
        }
    }
}

#[test]
fn noisy_round_trip() {
    let data = input(30_000, 2);
    let cfg = small_cfg(LayoutMode::Columnar);
    let pool = encode_input(&data, &cfg).unwrap();
    let ch = ChannelParams { coverage: 6.0, error_rate: 0.03, ..cfg.channel.clone() };
    let reads = pool.sample(&ch).unwrap();
    let out = pool.decode(&reads, &cfg, &Grouping::Lsh(cfg.cluster.clone()), None).unwrap();
    assert!(out.report.success(), "{:?}", out.report.blocks_failed);
    assert_eq!(out.bytes, data);
}
