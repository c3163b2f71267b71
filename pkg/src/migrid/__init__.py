"""Motor-imagery EEG decoding over a frequency-band x time-window grid."""
from .csp import CSP, CspModel, class_covariance, csp_features, fit_csp
from .edf import AnnotationEvent, EdfHeader, Recording, parse_annotations, parse_header, read_edf, read_recording, write_edf
from .evaluation import CvSummary, accuracy, cohen_kappa, cross_validate_combination, make_csp_lda, stratified_kfold
from .grid import (
    GridCell,
    GridTable,
    PopulationGrid,
    aggregate_population,
    best_combination_per_subject,
    build_band_grid,
    build_window_grid,
    run_subject_grid,
)
from .lda import LdaModel, ShrinkageLDA, fit_lda, ledoit_wolf_shrinkage, predict_lda
from .preprocess import BandSpec, EpochSet, TimeWindow, apply_zero_phase, design_bandpass, extract_epochs
from .stats import bonferroni_alpha, f_tail, pairwise_rm_f, rm_anova_two_way
from .synth import SynthSpec, generate_synthetic_subject

__version__ = "0.1.0"
