"""Dynamic ensemble selection with resampling-based classifier competence.

A pool of base classifiers is trained once; each member's competence — its
estimated probability of classifying correctly — is measured at validation
points (by bootstrap retraining or by randomized-support surrogates) and
generalized over feature space with a Gaussian potential field. Queries then
select the locally competent members and fuse their supports, weighted by
competence.
"""

from .classifiers import (DEFAULT_POOL, ClassifierSpec, TrainedClassifier,
                          register_classifier_kind, train, train_pool)
from .competence import (METHODS, BootstrapReplicas, CompetenceSet, MethodParams,
                         bootstrap_competence, bootstrap_sample,
                         build_competence_set, rrc_beta_competence,
                         rrc_gaussian_competence, train_bootstrap_replicas)
from .data import (AttributeMeta, Dataset, argmax_support, check_supports,
                   is_valid_supports, numeric_dataset, validate_dataset)
from .ensemble import (ClassificationTrace, TrainedEnsemble, classify,
                       classify_batch, classify_explain, fuse_supports,
                       select_ensemble, train_des)
from .field import CompetenceField, competence_at, competence_many, competence_profile
from .ingest import (IngestError, dataset_to_arff, load_dataset, parse_arff,
                     parse_csv)
from .metrics import CRITERIA, confusion, macro_micro_criteria
from .model_io import ModelError, load_model, save_model
from .preprocess import (Pipeline, fit_one_hot, fit_pca, fit_pipeline,
                         fit_standardizer)
from .seeding import derive_seed
from .stats import (average_ranks, bergmann_hommel, friedman_test,
                    multiplicity_control, wilcoxon_signed_rank)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
