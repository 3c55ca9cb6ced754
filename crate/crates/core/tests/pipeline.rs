//! Whole-pipeline integration over synthetic ledgers: generation, cleaning
//! with the intermediary-scheme defects, matching, pricing, profiles, and
//! the regression runners, glued exactly the way the CLI drives them.

use triarb_core::clean::{
    aggregate_same_second, anonymize_users, dedup, merge_public, restrict_sample, sanity_filter,
    DedupMethod, SanityOptions,
};
use triarb_core::currency::Currency;
use triarb_core::econ::{self, AbilityProxy};
use triarb_core::fees::{self, FeeSpec};
use triarb_core::ledger::McKind;
use triarb_core::matcher::{action_key, match_ledger, sweep_thresholds, MatchConfig};
use triarb_core::pricing::{FeeRegime, RateTable};
use triarb_core::profiles;
use triarb_core::synth::{self, SynthConfig};
use triarb_core::time::Timestamp;
use triarb_core::Decimal;

fn baseline_cfg() -> SynthConfig {
    SynthConfig {
        seed: 77,
        noise_trades: 3_000,
        planted_actions: 80,
        planted_metaorder_runs: 4,
        duplicate_rate: 0.05,
        multi_currency_share: 0.05,
        start: Timestamp::from_ymd_hms(2012, 1, 1, 0, 0, 0).unwrap(),
        end: Timestamp::from_ymd_hms(2012, 7, 1, 0, 0, 0).unwrap(),
        ..SynthConfig::default()
    }
}

#[test]
fn full_pipeline_recovers_planted_structure() {
    let cfg = baseline_cfg();
    let ledger = synth::gen_ledger(&cfg).unwrap();

    // Cleaning: dedup removes exactly the injected copies; the sanity pass
    // corrects the copied fiat amounts of the intermediary-scheme trades
    // and strips the intermediary rows.
    let (deduped, dedup_report) = dedup(&ledger.legs, DedupMethod::TradeId);
    assert_eq!(dedup_report.duplicate_rows, ledger.truth.injected_duplicate_rows.len());
    let (sane, sanity_report) = sanity_filter(&deduped, &ledger.public, &SanityOptions::default());
    assert!(sanity_report.reconciles());
    assert!(sanity_report.intermediary_rows > 0);
    assert!(sanity_report.money_corrected > 0);
    assert!(sane.iter().all(|l| !l.flags.intermediary));
    // Corrected legs now price near their public record.
    for leg in sane.iter().filter(|l| l.flags.money_corrected) {
        assert_eq!(leg.mc_kind, McKind::Tibanne);
        let record = ledger
            .public
            .iter()
            .find(|r| r.trade_id == leg.trade_id)
            .expect("corrected leg has a public record");
        assert_eq!(leg.money, record.price * leg.bitcoins);
    }

    let restricted = restrict_sample(&sane, cfg.end);
    let (merged, merge_stats) = merge_public(&restricted, &ledger.public);
    assert_eq!(merge_stats.missed, 0);
    let aggregated = aggregate_same_second(&merged);
    let (clean, mapping) = anonymize_users(&aggregated);
    assert!(!mapping.is_empty());

    // Matching on the anonymized ledger still recovers every planted
    // action: identify them through the (stable) trade ids.
    let actions = match_ledger(&clean, &MatchConfig::baseline());
    let mut found: Vec<_> = actions.iter().map(action_key).collect();
    found.sort();
    let mut expected: Vec<_> = ledger
        .truth
        .planted
        .iter()
        .map(|p| (p.buy_trade_id.clone(), p.sell_trade_id.clone()))
        .collect();
    expected.sort();
    assert_eq!(found, expected);

    // Pricing against generated hourly rates: nothing is excluded because
    // every canonical dyad has a full series.
    let bars = synth::gen_rates(&cfg.currencies, cfg.start, cfg.end, 0.002, cfg.seed);
    let rates = RateTable::new(&bars);
    let priced: Vec<_> = actions
        .iter()
        .map(|a| triarb_core::pricing::price_action(a, &rates, None).unwrap())
        .collect();
    assert!(priced.iter().all(|p| !p.excluded_missing_rate));
    assert!(priced.iter().all(|p| p.rate_change_pct.is_some()));
    for p in &priced {
        let (free, actual) = (p.spread_no_fees_pct.unwrap(), p.spread_actual_pct.unwrap());
        assert!(actual <= free + 1e-12);
    }

    // Profiles: both market groups appear, the planted runs surface as
    // metaorders, and action mass is conserved.
    let metas = profiles::detect_metaorders(
        &actions,
        &vec![0.0; actions.len()],
        &profiles::MetaorderConfig::default(),
    );
    assert!(metas.len() >= cfg.planted_metaorder_runs);
    let flags = profiles::classify_aggressive(&actions);
    let mut users = profiles::build_profiles(&actions, &metas, &flags);
    let total: usize = users.iter().map(|p| p.n_actions).sum();
    assert_eq!(total, actions.len());
    assert!(users.iter().any(|p| p.d_currencies));
    assert!(users.iter().any(|p| !p.d_currencies));
    assert!(users.iter().any(|p| p.d_metaorder));
    let pca = profiles::pca_scores(&users).unwrap();
    profiles::assign_scores(&mut users, &pca);
    assert!(pca.explained_variance > 0.0 && pca.explained_variance <= 1.0);

    // Regressions run end to end on the real pipeline outputs.
    let spec = econ::RegressionSpec {
        family: econ::RegressionFamily::AbilityLevel,
        outcome: FeeRegime::Actual,
        proxy: AbilityProxy::MultiMarket,
        fe_hour: true,
        fe_dyad: true,
        fe_user: false,
    };
    let eq1 = econ::run_eq_ability(&priced, &users, &spec).unwrap();
    assert!(eq1.n_used > 0);
    assert!(eq1.coefficient("d_currencies").is_some());

    let spec = econ::RegressionSpec {
        family: econ::RegressionFamily::RateInteraction,
        outcome: FeeRegime::Actual,
        proxy: AbilityProxy::Pc1,
        fe_hour: true,
        fe_dyad: true,
        fe_user: true,
    };
    let eq2 = econ::run_eq_interaction(&priced, &users, &spec).unwrap();
    assert!(eq2.coefficient("rate_change*pc1").is_some());
}

#[test]
fn robustness_grid_is_complete() {
    let cfg = baseline_cfg();
    let ledger = synth::gen_ledger(&cfg).unwrap();
    let (deduped, _) = dedup(&ledger.legs, DedupMethod::TradeId);
    let (sane, _) = sanity_filter(&deduped, &ledger.public, &SanityOptions::default());
    let clean = aggregate_same_second(&sane);
    let bars = synth::gen_rates(&cfg.currencies, cfg.start, cfg.end, 0.002, cfg.seed);
    let rates = RateTable::new(&bars);

    let observations = fees::build_fee_observations(&clean);
    let fee_model = fees::fit_fee_ols(&observations, FeeSpec(1), false).unwrap();

    let windows = [
        MatchConfig::new(30, Decimal::from(1)),
        MatchConfig::new(300, Decimal::from(10)),
        MatchConfig::new(600, Decimal::from(20)),
    ];
    let regimes = [FeeRegime::Actual, FeeRegime::NoFees, FeeRegime::Expected];
    let learning = [false, true];
    let cells = econ::robustness_suite(
        &clean,
        &rates,
        Some(&fee_model),
        &windows,
        &regimes,
        &learning,
        14,
    );
    assert_eq!(cells.len(), windows.len() * regimes.len() * learning.len());
    for cell in &cells {
        assert!(
            cell.result.is_ok(),
            "cell ({}, {}, {}, learning={}) failed: {:?}",
            cell.window.max_time_delta_secs,
            cell.window.max_volume_delta_pct,
            cell.regime.as_str(),
            cell.learning_filter,
            cell.result.as_ref().err()
        );
    }

    // Without a fee model the expected-fee cells fail soft and everything
    // else still runs.
    let cells = econ::robustness_suite(&clean, &rates, None, &windows, &regimes, &learning, 14);
    for cell in &cells {
        assert_eq!(cell.result.is_err(), cell.regime == FeeRegime::Expected);
    }
}

#[test]
fn action_counts_grow_with_the_window_on_separated_data() {
    // Planted actions are isolated, so each qualifies independently and the
    // count surface is non-decreasing along both axes. (This is an
    // empirical check on this data, not a theorem about greedy matching.)
    let cfg = SynthConfig {
        planted_actions: 120,
        planted_time_delta_secs: 500,
        planted_volume_delta_pct: 18.0,
        separation_secs: 1_500,
        noise_trades: 500,
        start: Timestamp::from_ymd_hms(2012, 1, 1, 0, 0, 0).unwrap(),
        end: Timestamp::from_ymd_hms(2012, 8, 1, 0, 0, 0).unwrap(),
        ..SynthConfig::default()
    };
    let ledger = synth::gen_ledger(&cfg).unwrap();
    let dts = [30_i64, 120, 300, 600];
    let dqs = [1_i64, 5, 10, 20];
    let grid: Vec<MatchConfig> = dts
        .iter()
        .flat_map(|&dt| dqs.iter().map(move |&dq| MatchConfig::new(dt, Decimal::from(dq))))
        .collect();
    let counts = sweep_thresholds(&ledger.legs, &grid);
    let count_at = |dt: i64, dq: i64| {
        counts
            .iter()
            .find(|(c, _)| {
                c.max_time_delta_secs == dt && c.max_volume_delta_pct == Decimal::from(dq)
            })
            .unwrap()
            .1
    };
    for (i, &dt) in dts.iter().enumerate() {
        for (j, &dq) in dqs.iter().enumerate() {
            if i > 0 {
                assert!(count_at(dt, dq) >= count_at(dts[i - 1], dq));
            }
            if j > 0 {
                assert!(count_at(dt, dq) >= count_at(dt, dqs[j - 1]));
            }
        }
    }
    // The largest window sees every planted action.
    assert_eq!(count_at(600, 20), cfg.planted_actions);
    let _ = Currency::Usd;
}
