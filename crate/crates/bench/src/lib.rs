//! Seeded fixtures shared by the criterion benches.

use ara_core::{
    gen_fams, gen_tsg, FamsGenConfig, FamsInstance, Instance, TsgGenConfig, TsgInstance,
};

/// FAMS instance with ten marshals, one hundred schedules and five flights
/// per schedule.
pub fn fams(flights: usize) -> FamsInstance {
    gen_fams(&FamsGenConfig {
        seed: 1,
        flights,
        schedules: 100,
        marshals: 10,
        targets_per_schedule: 5,
    })
    .expect("fixture config is valid")
}

/// Smaller FAMS shape whose column generation finishes in milliseconds.
pub fn fams_small(flights: usize) -> FamsInstance {
    gen_fams(&FamsGenConfig {
        seed: 1,
        flights,
        schedules: 40,
        marshals: 5,
        targets_per_schedule: 3,
    })
    .expect("fixture config is valid")
}

pub fn tsg(flights: usize) -> TsgInstance {
    gen_tsg(&TsgGenConfig::desk(1, flights)).expect("fixture config is valid")
}

pub fn instance<T: Into<Instance>>(inner: T) -> Instance {
    inner.into()
}
