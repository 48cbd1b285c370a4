"""Climate-driven modeling of the October orange-production forecast error.

The pipeline: ingest forecast/weather/price histories, build climate
predictors per county and per yield-cluster, explain the percent error
with event indicators plus a local polynomial regression selected by
GCV, bootstrap an error distribution for a target season, and turn it
into an EMV-ranked hedging recommendation.
"""

from .clustering import (
    ClusterAssignment,
    TimeSeriesKMeans,
    aggregate_cluster_features,
    cluster_counties,
)
from .decision import (
    PayoffEstimates,
    Position,
    Recommendation,
    Scenario,
    emv,
    estimate_payoffs,
    recommend,
)
from .errors import (
    ConfigError,
    NumericalError,
    OrangecastError,
    ParseError,
    ValidationError,
)
from .events import (
    EventRegressionFit,
    ScreeningReport,
    fit_event_regression,
    mutual_information,
    screen_predictors,
)
from .features import (
    FeatureParams,
    FeatureValue,
    PredictorMatrix,
    build_station_series,
    compute_feature_rows,
    compute_station_features,
)
from .forecast import (
    ErrorDistribution,
    OutlookCategory,
    Tilt,
    bootstrap_distribution,
    cdf_points,
    exceedance_probability,
    outlook_tilt,
)
from .ingest import (
    DailyWeatherRecord,
    EventCalendar,
    OrangeType,
    PriceBar,
    SeasonRecord,
    load_event_calendar,
    load_forecast_history,
    load_price_history,
    load_weather_history,
    percent_error,
    select_station_per_county,
)
from .localreg import (
    DEFAULT_ALPHA_GRID,
    GcvTable,
    LocalPolynomialRegression,
    enumerate_models,
    gcv,
    gcv_score,
    get_preset,
)

__version__ = "0.1.0"
