//! Seeded random dispatch instances for tests and benchmarks.

use rand::Rng;

use crate::dispatch::{Design, DispatchParams, DispatchProblem};
use crate::timeseries::synth_trace;

/// Owned data behind a [`DispatchProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub design: Design,
    pub params: DispatchParams,
    pub load_kw: Vec<f64>,
    pub grid_price: Vec<f64>,
    pub pv_availability: Vec<f64>,
    pub soc_start: f64,
}

impl Instance {
    pub fn problem(&self) -> DispatchProblem<'_> {
        DispatchProblem {
            design: self.design,
            params: &self.params,
            load_kw: &self.load_kw,
            grid_price: &self.grid_price,
            pv_availability: &self.pv_availability,
            diesel_price: None,
            soc_start: self.soc_start,
        }
    }
}

fn random_params<R: Rng>(rng: &mut R, diesel_max: f64) -> DispatchParams {
    let soc_min_frac = rng.gen_range(0.0..0.3);
    let soc_max_frac = rng.gen_range(0.7..=1.0);
    DispatchParams {
        diesel_price: rng.gen_range(0.1..0.4),
        diesel_max_kw: diesel_max,
        diesel_min_kw: rng.gen_range(0.0..0.6) * diesel_max,
        eta_charge: rng.gen_range(0.8..=1.0),
        eta_discharge: rng.gen_range(0.8..=1.0),
        soc_min_frac,
        soc_max_frac,
        soc_init_frac: rng.gen_range(soc_min_frac..=soc_max_frac),
        c_rate: if rng.gen_bool(0.5) { Some(rng.gen_range(0.2..1.0)) } else { None },
    }
}

/// Small instance with arbitrary prices and loads of order 10 kW.
pub fn small_instance<R: Rng>(rng: &mut R, hours: usize) -> Instance {
    let diesel_max = rng.gen_range(5.0..20.0);
    let params = random_params(rng, diesel_max);
    let design = Design::new(if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(1.0..30.0) }, rng.gen_range(0.0..15.0));
    let soc_start = params.soc_init_frac * design.battery_kwh;
    Instance {
        design,
        params,
        load_kw: (0..hours).map(|_| rng.gen_range(0.0..20.0)).collect(),
        grid_price: (0..hours).map(|_| rng.gen_range(0.05..0.5)).collect(),
        pv_availability: (0..hours).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..=1.0) }).collect(),
        soc_start,
    }
}

/// One week of a synthetic trace with a random design and random physical
/// parameters.
pub fn weekly_instance<R: Rng>(rng: &mut R, hours: usize) -> Instance {
    let trace = synth_trace(rng.gen(), hours).expect("hours > 0");
    let peak = trace.peak_load();
    let params = DispatchParams { diesel_price: rng.gen_range(0.2..0.4), ..random_params(rng, peak) };
    let design = Design::new(rng.gen_range(0.0..5000.0), rng.gen_range(0.0..3000.0));
    let soc_start = params.soc_init_frac * design.battery_kwh;
    Instance {
        design,
        params,
        load_kw: trace.load_kw().to_vec(),
        grid_price: trace.grid_price().to_vec(),
        pv_availability: trace.pv_availability().to_vec(),
        soc_start,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_problems_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for h in 1..6 {
            small_instance(&mut rng, h).problem().validate().unwrap();
        }
        weekly_instance(&mut rng, 48).problem().validate().unwrap();
    }
}
