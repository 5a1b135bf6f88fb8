//! Seasonal totals: electric balance per transformer, gas supply mix, and
//! plant production.

use serde::Serialize;

use super::{RunMetadata, StepRecord};
use crate::scenario::Season;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Heating,
    NonHeating,
    WholeYear,
}

impl Period {
    pub const ALL: [Period; 3] = [Period::Heating, Period::NonHeating, Period::WholeYear];

    pub fn label(&self) -> &'static str {
        match self {
            Period::Heating => "heating",
            Period::NonHeating => "non_heating",
            Period::WholeYear => "whole_year",
        }
    }

    pub fn contains(&self, season: Season) -> bool {
        match self {
            Period::Heating => season == Season::Heating,
            Period::NonHeating => season == Season::NonHeating,
            Period::WholeYear => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElectricSeasonRow {
    pub transformer: u32,
    pub period: Period,
    pub el_demand_mwh: f64,
    pub res_mwh: f64,
    pub surplus_mwh: f64,
    pub absorbed_mwh: f64,
    pub rpf_mwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GasSeasonRow {
    pub period: Period,
    pub ng_demand_mwh: f64,
    pub ng_imported_mwh: f64,
    pub sng_mwh: f64,
    /// SNG over NG demand, percent.
    pub sng_share_pct: f64,
    /// Change of the stored mass over the period, as NG energy.
    pub linepack_change_mwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantSeasonRow {
    pub plant: String,
    pub period: Period,
    pub electricity_mwh: f64,
    pub surplus_electricity_mwh: f64,
    pub deficit_electricity_mwh: f64,
    pub h2_t: f64,
    pub sng_mwh: f64,
    pub co2_t: f64,
    pub o2_t: f64,
    pub heat_mwh: f64,
    pub electrolyzer_full_load_hours: f64,
    pub curtailed_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeasonalTables {
    pub electric: Vec<ElectricSeasonRow>,
    pub gas: Vec<GasSeasonRow>,
    pub plants: Vec<PlantSeasonRow>,
}

/// Sum the step records per heating season, non-heating season and whole
/// horizon. Energies are in MWh (gas at the NG heating value).
pub fn aggregate(meta: &RunMetadata, records: &[StepRecord]) -> SeasonalTables {
    let dt_h = meta.step_seconds as f64 / 3600.0;
    let lhv = meta.ng_lhv_kwh_per_kg;
    let mut electric = Vec::new();
    let mut gas = Vec::new();
    let mut plants = Vec::new();

    for (f, id) in meta.transformer_ids.iter().enumerate() {
        for period in Period::ALL {
            let mut row = ElectricSeasonRow {
                transformer: *id,
                period,
                el_demand_mwh: 0.0,
                res_mwh: 0.0,
                surplus_mwh: 0.0,
                absorbed_mwh: 0.0,
                rpf_mwh: 0.0,
            };
            for r in records.iter().filter(|r| period.contains(r.season)) {
                let fr = &r.feeders[f];
                row.el_demand_mwh += fr.load_kw * dt_h / 1000.0;
                row.res_mwh += fr.res_kw * dt_h / 1000.0;
                row.surplus_mwh += fr.surplus_kw * dt_h / 1000.0;
                row.absorbed_mwh += fr.absorbed_kw * dt_h / 1000.0;
                row.rpf_mwh += fr.rpf_kw * dt_h / 1000.0;
            }
            electric.push(row);
        }
    }

    for period in Period::ALL {
        let (mut demand, mut imported, mut sng, mut linepack) = (0.0, 0.0, 0.0, 0.0);
        let mut previous = meta.initial_linepack_kg;
        for r in records {
            if period.contains(r.season) {
                demand += r.gas.withdrawn_kg;
                imported += r.gas.citygate_kg;
                sng += r.gas.sng_injected_kg;
                linepack += r.gas.linepack_kg - previous;
            }
            previous = r.gas.linepack_kg;
        }
        let to_mwh = |kg: f64| kg * lhv / 1000.0;
        gas.push(GasSeasonRow {
            period,
            ng_demand_mwh: to_mwh(demand),
            ng_imported_mwh: to_mwh(imported),
            sng_mwh: to_mwh(sng),
            sng_share_pct: if demand > 0.0 { 100.0 * sng / demand } else { 0.0 },
            linepack_change_mwh: to_mwh(linepack),
        });
    }

    for (p, cfg) in meta.plants.iter().enumerate() {
        for period in Period::ALL {
            let mut row = PlantSeasonRow {
                plant: cfg.name.clone(),
                period,
                electricity_mwh: 0.0,
                surplus_electricity_mwh: 0.0,
                deficit_electricity_mwh: 0.0,
                h2_t: 0.0,
                sng_mwh: 0.0,
                co2_t: 0.0,
                o2_t: 0.0,
                heat_mwh: 0.0,
                electrolyzer_full_load_hours: 0.0,
                curtailed_steps: 0,
            };
            for r in records.iter().filter(|r| period.contains(r.season)) {
                let pr = &r.plants[p];
                let s = &pr.step;
                row.electricity_mwh += s.electricity_kwh() / 1000.0;
                row.surplus_electricity_mwh += s.electricity_surplus_kwh / 1000.0;
                row.deficit_electricity_mwh += s.electricity_deficit_kwh / 1000.0;
                row.h2_t += s.h2_produced_kg / 1000.0;
                row.sng_mwh += s.sng_kwh / 1000.0;
                row.co2_t += s.co2_consumed_kg / 1000.0;
                row.o2_t += s.o2_produced_kg / 1000.0;
                row.heat_mwh += s.heat_kwh / 1000.0;
                row.curtailed_steps += pr.curtailed as usize;
            }
            row.electrolyzer_full_load_hours = row.electricity_mwh * 1000.0 / cfg.electrolyzer.nominal_power_kw;
            plants.push(row);
        }
    }

    SeasonalTables { electric, gas, plants }
}
