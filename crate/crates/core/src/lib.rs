//! Forecasting age-specific rate surfaces with a Box-Cox transform, a
//! principal-component (modified Lee-Carter) decomposition and ARIMA score
//! forecasts, plus selection of the Box-Cox parameter by rolling-origin
//! forecast accuracy.

pub mod arima;
pub mod cli;
pub mod data;
pub mod decomposition;
pub mod error;
pub mod evaluation;
pub mod forecast;
pub mod lambda_opt;
pub mod normal;
pub mod optim;
pub mod simulate;
pub mod transform;

pub use data::{load_rates, split_by_fraction, write_rates, AgeRateSurface, LoadOptions, SampleSplit};
pub use decomposition::{ComponentRule, PcaDecomposition};
pub use error::{Error, Result};
pub use evaluation::{rolling_origin, HorizonErrorTable, RollingOriginOptions};
pub use forecast::{forecast_surface, ForecastOptions, ForecastRun, RateForecast};
pub use lambda_opt::{compare_lambdas, optimize_lambda, Criterion, LambdaSelection, Method, SelectionOptions};
pub use transform::{box_cox, inv_box_cox, BoxCoxLambda};
