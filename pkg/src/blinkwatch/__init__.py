"""blinkwatch: drowsiness detection from eye blinking and head posture.

Pipeline: cascade face detection, eye detection inside the face, eye
closure / PERCLOS tracking, head-pitch estimation from the eye centers,
and a three-level rule engine that raises alerts. Includes a cascade
training toolkit and a detection-rate evaluation harness.
"""

__version__ = "0.1.0"

from .boosting import (LabeledSample, StrongClassifier, WeakClassifier,
                       adaboost_train, make_sample, train_stump)
from .cascade import (CascadeModel, CascadeStage, Detection, ScanStats,
                      classify_window, detect_eyes_in_face, detect_multiscale,
                      iou, nms, train_cascade)
from .errors import (BlinkwatchError, CascadeXmlError, DatasetError,
                     ModelFormatError, ModelInvariantError, ModelTruncationError,
                     ModelVersionError, PgmError, TrainingError,
                     UnsupportedCascadeError)
from .evaluation import (BioidSample, GdrReport, compute_gdr1, compute_gdr2,
                         compute_gdr3, eye_match, load_bioid)
from .haar import FeatureKind, HaarFeature, count_features, enumerate_features, eval_feature
from .imaging import (GrayImage, IntegralImage, Rect, compute_integral,
                      decode_pgm, encode_pgm, read_pgm, rect_sum, window_stats,
                      write_pgm)
from .model_io import load_model, parse_legacy_cascade_xml, read_model, save_model
from .tracker import (AlertEvent, DrowsinessLevel, DrowsinessTracker,
                      EyeObservation, FrameAssessment, TrackerConfig,
                      classify_state, compute_pitch, perclos)

__all__ = [name for name in dir() if not name.startswith("_")]
