//! Raw data sources, trip reconstruction, routing, and the synthetic city.

pub mod bundle;
pub mod load;
pub mod routing;
pub mod snapshots;
pub mod synth;

pub use bundle::{
    map_socio_year, BundleConfig, Holiday, MotorizedObservation, PlanningArea, Poi, SourceBundle,
    StravaHexDay, StravaSegmentDay, WeatherDaily,
};
pub use load::{load_bundle, save_bundle, save_trips};
pub use routing::{route_trip, route_trips, RouteOutcome, RoutingOutcome, StreetEdge, StreetGraph};
pub use snapshots::{reconstruct_trips, AvailabilitySnapshot, Trip};
pub use synth::{generate_synthetic_city, SynthConfig, SynthTruth};
