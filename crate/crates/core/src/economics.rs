//! Yearly cash flows and the levelized cost of SNG.
//!
//! Year 0 carries the investment only; years 1..=n carry operation,
//! production, by-product revenues and periodic stack replacement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::PlantConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconomicsError {
    #[error("discounted SNG production is zero; the levelized cost is undefined")]
    ZeroProduction,
    #[error("cash flow and production series differ in length ({cash} vs {energy})")]
    LengthMismatch { cash: usize, energy: usize },
    #[error("invalid cost scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapexRates {
    pub electrolyzer_eur_per_kwe: f64,
    pub h2_buffer_eur_per_m3_h2: f64,
    pub methanation_eur_per_kw_sng: f64,
}

/// Yearly OPEX as a fraction of each component's CAPEX.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpexFractions {
    pub electrolyzer: f64,
    pub h2_buffer: f64,
    pub methanation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostScenario {
    pub year_label: u32,
    pub capex: CapexRates,
    pub opex_fraction: OpexFractions,
    pub plant_lifetime_y: u32,
    pub wacc: f64,
    pub deficit_price_eur_per_mwh: f64,
    pub surplus_price_eur_per_mwh: f64,
    pub stack_replacement_fraction: f64,
    pub replacement_period_y: u32,
    pub co2_cost_eur_per_t: f64,
    pub o2_revenue_eur_per_t: f64,
    pub heat_revenue_eur_per_mwh: f64,
}

impl CostScenario {
    pub fn preset_2030() -> Self {
        Self {
            year_label: 2030,
            capex: CapexRates {
                electrolyzer_eur_per_kwe: 650.0,
                h2_buffer_eur_per_m3_h2: 75.0,
                methanation_eur_per_kw_sng: 500.0,
            },
            opex_fraction: OpexFractions { electrolyzer: 0.03, h2_buffer: 0.015, methanation: 0.05 },
            ..Self::common()
        }
    }

    pub fn preset_2050() -> Self {
        Self {
            year_label: 2050,
            capex: CapexRates {
                electrolyzer_eur_per_kwe: 400.0,
                h2_buffer_eur_per_m3_h2: 50.0,
                methanation_eur_per_kw_sng: 300.0,
            },
            opex_fraction: OpexFractions { electrolyzer: 0.02, h2_buffer: 0.015, methanation: 0.03 },
            ..Self::common()
        }
    }

    fn common() -> Self {
        Self {
            year_label: 0,
            capex: CapexRates { electrolyzer_eur_per_kwe: 0.0, h2_buffer_eur_per_m3_h2: 0.0, methanation_eur_per_kw_sng: 0.0 },
            opex_fraction: OpexFractions { electrolyzer: 0.0, h2_buffer: 0.0, methanation: 0.0 },
            plant_lifetime_y: 20,
            wacc: 0.08,
            deficit_price_eur_per_mwh: 60.0,
            surplus_price_eur_per_mwh: 0.0,
            stack_replacement_fraction: 0.35,
            replacement_period_y: 5,
            co2_cost_eur_per_t: 50.0,
            o2_revenue_eur_per_t: 70.0,
            heat_revenue_eur_per_mwh: 30.0,
        }
    }

    pub fn with_surplus_price(&self, price: f64) -> Self {
        Self { surplus_price_eur_per_mwh: price, ..self.clone() }
    }

    /// Same scenario with O₂ and heat sold for nothing.
    pub fn without_byproducts(&self) -> Self {
        Self { o2_revenue_eur_per_t: 0.0, heat_revenue_eur_per_mwh: 0.0, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), EconomicsError> {
        let c = &self.capex;
        let o = &self.opex_fraction;
        let prices = [
            ("capex.electrolyzer_eur_per_kwe", c.electrolyzer_eur_per_kwe),
            ("capex.h2_buffer_eur_per_m3_h2", c.h2_buffer_eur_per_m3_h2),
            ("capex.methanation_eur_per_kw_sng", c.methanation_eur_per_kw_sng),
            ("opex_fraction.electrolyzer", o.electrolyzer),
            ("opex_fraction.h2_buffer", o.h2_buffer),
            ("opex_fraction.methanation", o.methanation),
            ("wacc", self.wacc),
            ("deficit_price_eur_per_mwh", self.deficit_price_eur_per_mwh),
            ("surplus_price_eur_per_mwh", self.surplus_price_eur_per_mwh),
            ("stack_replacement_fraction", self.stack_replacement_fraction),
            ("co2_cost_eur_per_t", self.co2_cost_eur_per_t),
            ("o2_revenue_eur_per_t", self.o2_revenue_eur_per_t),
            ("heat_revenue_eur_per_mwh", self.heat_revenue_eur_per_mwh),
        ];
        for (name, v) in prices {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EconomicsError::InvalidScenario(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        if self.plant_lifetime_y == 0 {
            return Err(EconomicsError::InvalidScenario("plant_lifetime_y must be at least 1".into()));
        }
        Ok(())
    }

    /// Operating years in which the stack is replaced (never the last one).
    pub fn is_replacement_year(&self, year: u32) -> bool {
        self.replacement_period_y > 0
            && year > 0
            && year < self.plant_lifetime_y
            && year.is_multiple_of(self.replacement_period_y)
    }
}

/// Installed sizes that CAPEX rates apply to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantSizing {
    pub electrolyzer_kwe: f64,
    /// Working hydrogen volume of the tank at normal conditions.
    pub h2_buffer_m3: f64,
    pub methanation_kw_sng: f64,
}

impl PlantSizing {
    pub fn from_config(config: &PlantConfig) -> Self {
        Self {
            electrolyzer_kwe: config.electrolyzer.nominal_power_kw,
            h2_buffer_m3: config.buffer.usable_normal_m3(),
            methanation_kw_sng: config.methanation.nominal_sng_kw(),
        }
    }
}

/// One plant's yearly energy and mass flows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnualAccounts {
    pub surplus_energy_mwh: f64,
    pub deficit_energy_mwh: f64,
    pub sng_mwh: f64,
    pub co2_t: f64,
    pub o2_t: f64,
    pub heat_mwh: f64,
}

impl AnnualAccounts {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            surplus_energy_mwh: k * self.surplus_energy_mwh,
            deficit_energy_mwh: k * self.deficit_energy_mwh,
            sng_mwh: k * self.sng_mwh,
            co2_t: k * self.co2_t,
            o2_t: k * self.o2_t,
            heat_mwh: k * self.heat_mwh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CashFlow {
    pub capex: f64,
    pub opex: f64,
    pub c_el: f64,
    pub c_co2: f64,
    pub c_r: f64,
    pub r_o2: f64,
    pub r_heat: f64,
}

impl CashFlow {
    pub fn net_cost(&self) -> f64 {
        self.capex + self.opex + self.c_el + self.c_co2 + self.c_r - self.r_o2 - self.r_heat
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ComponentCapex {
    electrolyzer: f64,
    buffer: f64,
    methanation: f64,
}

fn component_capex(scenario: &CostScenario, sizing: &PlantSizing) -> ComponentCapex {
    ComponentCapex {
        electrolyzer: sizing.electrolyzer_kwe * scenario.capex.electrolyzer_eur_per_kwe,
        buffer: sizing.h2_buffer_m3 * scenario.capex.h2_buffer_eur_per_m3_h2,
        methanation: sizing.methanation_kw_sng * scenario.capex.methanation_eur_per_kw_sng,
    }
}

pub fn annual_cashflow(accounts: &AnnualAccounts, scenario: &CostScenario, sizing: &PlantSizing, year: u32) -> CashFlow {
    let capex = component_capex(scenario, sizing);
    if year == 0 {
        return CashFlow { capex: capex.electrolyzer + capex.buffer + capex.methanation, ..Default::default() };
    }
    let f = &scenario.opex_fraction;
    CashFlow {
        capex: 0.0,
        opex: f.electrolyzer * capex.electrolyzer + f.h2_buffer * capex.buffer + f.methanation * capex.methanation,
        c_el: accounts.surplus_energy_mwh * scenario.surplus_price_eur_per_mwh
            + accounts.deficit_energy_mwh * scenario.deficit_price_eur_per_mwh,
        c_co2: accounts.co2_t * scenario.co2_cost_eur_per_t,
        c_r: if scenario.is_replacement_year(year) { scenario.stack_replacement_fraction * capex.electrolyzer } else { 0.0 },
        r_o2: accounts.o2_t * scenario.o2_revenue_eur_per_t,
        r_heat: accounts.heat_mwh * scenario.heat_revenue_eur_per_mwh,
    }
}

/// Discounted net cost over discounted SNG energy (€/MWh); index = year.
pub fn lc_sng(cashflows: &[CashFlow], sng_mwh: &[f64], wacc: f64) -> Result<f64, EconomicsError> {
    if cashflows.len() != sng_mwh.len() {
        return Err(EconomicsError::LengthMismatch { cash: cashflows.len(), energy: sng_mwh.len() });
    }
    let mut cost = 0.0;
    let mut energy = 0.0;
    let mut discount = 1.0;
    for (cf, e) in cashflows.iter().zip(sng_mwh) {
        cost += cf.net_cost() / discount;
        energy += e / discount;
        discount *= 1.0 + wacc;
    }
    if !(energy > 0.0) {
        return Err(EconomicsError::ZeroProduction);
    }
    Ok(cost / energy)
}

/// Cash flows and SNG series for a plant repeating `accounts` every operating year.
pub fn lifetime_series(accounts: &AnnualAccounts, scenario: &CostScenario, sizing: &PlantSizing) -> (Vec<CashFlow>, Vec<f64>) {
    (0..=scenario.plant_lifetime_y)
        .map(|i| {
            let e = if i == 0 { 0.0 } else { accounts.sng_mwh };
            (annual_cashflow(accounts, scenario, sizing, i), e)
        })
        .unzip()
}

pub fn levelized_cost(accounts: &AnnualAccounts, scenario: &CostScenario, sizing: &PlantSizing) -> Result<f64, EconomicsError> {
    let (cf, e) = lifetime_series(accounts, scenario, sizing);
    lc_sng(&cf, &e, scenario.wacc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantEconomics {
    pub name: String,
    pub sizing: PlantSizing,
    pub accounts: AnnualAccounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub plant: String,
    pub year_label: u32,
    pub surplus_price_eur_per_mwh: f64,
    pub lc_sng_eur_per_mwh: f64,
    pub lc_sng_without_byproducts_eur_per_mwh: f64,
}

impl SweepRow {
    /// Relative LC_SNG reduction owed to O₂ and heat sales.
    pub fn byproduct_reduction(&self) -> f64 {
        1.0 - self.lc_sng_eur_per_mwh / self.lc_sng_without_byproducts_eur_per_mwh
    }
}

pub const SWEEP_SURPLUS_PRICES: [f64; 4] = [0.0, 5.0, 15.0, 30.0];

/// LC_SNG for every plant × cost scenario × surplus price. Plants with no
/// SNG output are skipped.
pub fn sensitivity_sweep(plants: &[PlantEconomics], scenarios: &[CostScenario], surplus_prices: &[f64]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for p in plants {
        for s in scenarios {
            for &price in surplus_prices {
                let priced = s.with_surplus_price(price);
                let (Ok(lc), Ok(bare)) = (
                    levelized_cost(&p.accounts, &priced, &p.sizing),
                    levelized_cost(&p.accounts, &priced.without_byproducts(), &p.sizing),
                ) else {
                    continue;
                };
                rows.push(SweepRow {
                    plant: p.name.clone(),
                    year_label: s.year_label,
                    surplus_price_eur_per_mwh: price,
                    lc_sng_eur_per_mwh: lc,
                    lc_sng_without_byproducts_eur_per_mwh: bare,
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_capex_sizing() -> PlantSizing {
        PlantSizing { electrolyzer_kwe: 0.0, h2_buffer_m3: 0.0, methanation_kw_sng: 0.0 }
    }

    #[test]
    fn year_zero_is_capex_only() {
        let s = CostScenario::preset_2030();
        let sizing = PlantSizing { electrolyzer_kwe: 1000.0, h2_buffer_m3: 100.0, methanation_kw_sng: 500.0 };
        let acc = AnnualAccounts { surplus_energy_mwh: 100.0, sng_mwh: 50.0, ..Default::default() };
        let cf = annual_cashflow(&acc, &s, &sizing, 0);
        assert_eq!(cf.capex, 650_000.0 + 7_500.0 + 250_000.0);
        assert_eq!(cf.net_cost(), cf.capex);
        let y5 = annual_cashflow(&acc, &s, &sizing, 5);
        assert!((y5.c_r - 0.35 * 650_000.0).abs() < 1e-9);
        assert_eq!(annual_cashflow(&acc, &s, &sizing, 6).c_r, 0.0);
        assert_eq!(annual_cashflow(&acc, &s, &sizing, 20).c_r, 0.0);
    }

    #[test]
    fn electricity_cost_hand_value() {
        let s = CostScenario::preset_2030().with_surplus_price(15.0);
        let acc = AnnualAccounts { surplus_energy_mwh: 100.0, deficit_energy_mwh: 10.0, ..Default::default() };
        let cf = annual_cashflow(&acc, &s, &no_capex_sizing(), 7);
        assert!((cf.c_el - 2100.0).abs() < 1e-9);
    }

    #[test]
    fn undiscounted_ratio() {
        let cf = vec![CashFlow { opex: 100.0, ..Default::default() }; 5];
        let lc = lc_sng(&cf, &[2.0; 5], 0.0).unwrap();
        assert!((lc - 50.0).abs() < 1e-12);
    }

    #[test]
    fn discounted_golden_value() {
        let mut cf = vec![CashFlow { capex: 1000.0, ..Default::default() }];
        let mut e = vec![0.0];
        for _ in 1..=20 {
            cf.push(CashFlow { opex: 50.0, ..Default::default() });
            e.push(10.0);
        }
        let lc = lc_sng(&cf, &e, 0.08).unwrap();
        assert!((lc - 15.185_220_882_315_062).abs() < 1e-9, "{lc}");
    }

    #[test]
    fn zero_production_is_an_error() {
        let cf = vec![CashFlow::default(); 3];
        assert_eq!(lc_sng(&cf, &[0.0; 3], 0.08), Err(EconomicsError::ZeroProduction));
    }

    #[test]
    fn presets_are_valid() {
        CostScenario::preset_2030().validate().unwrap();
        CostScenario::preset_2050().validate().unwrap();
        let mut bad = CostScenario::preset_2030();
        bad.deficit_price_eur_per_mwh = -1.0;
        assert!(bad.validate().is_err());
    }
}
