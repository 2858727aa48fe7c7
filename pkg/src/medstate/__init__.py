"""Meditation-state EEG classification: TR-CSP + LDA, CSP-LDA-LSTM and SVD-NN,
with from-scratch Jacobi linear algebra and a synthetic cohort generator."""
from .core import (BandDef, BandName, CohortDataset, Condition, Epoch, EpochSet, Recording, SubjectData,
                   band_definitions, get_band, slice_epochs)
from .csp import ClassCovariance, SpatialFilterBank, class_covariance, fit_csp, log_variance_features, objective
from .cv import CvMode, CvReport, FoldPlan, SweepTable, carve_validation, grid_sweep, plan_intra, plan_loso, run_experiment
from .dsp import FilterKind, FilterSpec, apply_filter, bandpass, notch
from .lda import LdaModel, classify, fit_lda, project
from .lstm import LstmConfig, LstmModel, dump_lstm, fit_csp_lda_lstm, load_lstm, predict_lstm, train_lstm
from .numerics import EigenResult, SvdResult, gen_sym_eig, svd, sym_eig
from .pipelines import PipelineKind, make_pipeline
from .svdnn import NnConfig, SvdBasis, build_design_matrix, dump_svdnn, fit_basis, load_svdnn, select_k, train_nn
from .synth import SynthParams, generate_cohort, generate_subject

__version__ = "0.1.0"
