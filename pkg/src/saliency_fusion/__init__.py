"""Learn feature-map fusion weights for video saliency from eye-tracking data."""
from .errors import SaliencyFusionError
from .estimators import EM, LASSO_BIC, LS, RegressionProblem, em_fit, lasso_fit_bic, lasso_path, least_squares_fit
from .features import DEFAULT_FEATURES, FeatureStack, build_stack
from .fmap import read_fmap, write_fmap
from .fusion import SCHEMES, WeightDatabase, fuse_linear, fuse_marat2009, fuse_marat2013, fuse_mean, loo_weights
from .gaze import eye_position_density, read_gaze_csv
from .grid import PAL_GEOMETRY, DensityMap, SceneGeometry, WeightVector, normalize_to_pdf
from .metrics import kld, nss, period_summary
from .pipeline import fit_frame, score_frame

__version__ = "0.1.0"
