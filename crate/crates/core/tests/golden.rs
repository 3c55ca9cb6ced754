//! Golden-file checks: generator outputs are committed and regeneration
//! must reproduce them byte for byte, so any drift in the random source,
//! decimal formatting, or generation order is caught immediately.

use triarb_core::ledger::parse_leaked_file;
use triarb_core::synth::{gen_ledger, render_leaked_csv, SynthConfig};

const GOLDEN_LEDGER: &str = include_str!("golden/synth-seed9-ledger.csv");
const GOLDEN_TRUTH: &str = include_str!("golden/synth-seed9-truth.csv");

fn golden_config() -> SynthConfig {
    SynthConfig { seed: 9, noise_trades: 30, planted_actions: 6, ..SynthConfig::default() }
}

#[test]
fn generator_reproduces_the_committed_ledger() {
    let cfg = golden_config();
    let ledger = gen_ledger(&cfg).unwrap();
    let rendered = render_leaked_csv(&ledger.legs, cfg.family);
    assert_eq!(rendered, GOLDEN_LEDGER);
}

#[test]
fn planted_truth_matches_the_committed_list() {
    let cfg = golden_config();
    let ledger = gen_ledger(&cfg).unwrap();
    let mut expected = String::from("# triarb-truth v1\nkind,user_id,buy_trade_id,sell_trade_id\n");
    for p in &ledger.truth.planted {
        expected.push_str(&format!(
            "planted,{},{},{}\n",
            p.user_id, p.buy_trade_id, p.sell_trade_id
        ));
    }
    assert_eq!(expected, GOLDEN_TRUTH);
}

#[test]
fn committed_ledger_parses_cleanly() {
    let cfg = golden_config();
    let parsed = parse_leaked_file(GOLDEN_LEDGER, cfg.family).unwrap();
    assert!(parsed.row_errors.is_empty());
    assert_eq!(parsed.legs.len(), GOLDEN_LEDGER.lines().count() - 1);
    assert_eq!(render_leaked_csv(&parsed.legs, cfg.family), GOLDEN_LEDGER);
}
