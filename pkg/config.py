"""
Configuration file for the single-copy product testing toolkit
"""
import os
from dotenv import load_dotenv

load_dotenv()

# Type invariants are checked on every construction unless switched off
VALIDATE_STATES = os.getenv('PRODTEST_VALIDATE', 'True').lower() == 'true'

# Numerical tolerances
TOLERANCES = {
    'norm': 1e-12,
    'hermitian': 1e-12,
    'trace': 1e-12,
    'psd_floor': -1e-10,
    'schmidt_sum': 1e-10,
    'bound_slack': 1e-9,
    'povm_completeness': 1e-8,
    'povm_weights': 1e-10,
    'probability_sum': 1e-9,
    'overlap_oracle': 1e-8,  # relative
}

# Desk-scale size caps
SIZE_CAPS = {
    'cut_factors': 20,
    'permanent_side': 30,
    'brute_force_side': 9,
    'permutation_degree': 8,
    'overlap_oracle_dim': 4096,
    'product_oracle_dim': 65536,
    'product_oracle_copies': 4,
    'explicit_operator_dim': 256,
    'p_test_factors': 12,
    'exact_strings': 10**6,
    'closed_form_strings': 10**5,
}

# Best rank-one (fully product) approximation
MP_OPTIMIZER = {
    'restarts': 16,
    'max_iters': 200,
    'tol': 1e-10,
}

# Single-copy purity estimator schedule:
#   shots per basis K = ceil(c1 * sqrt(D) / eps), bases M = ceil(c2 * log(1/delta) / eps^2)
PURITY_ESTIMATOR = {
    'shots_constant': float(os.getenv('PRODTEST_PURITY_C1', 1.0)),
    'bases_constant': float(os.getenv('PRODTEST_PURITY_C2', 2.0)),
    'min_shots': 2,
    'groups': 8,
    'chunk_bases': int(os.getenv('PRODTEST_CHUNK_BASES', 256)),
}

# Canonical far-from-product construction
FAR_STATE = {
    'max_redraws': 8,
    'tol': 1e-6,
    'max_eps': 2 ** -0.5,
}

# Confidence reporting
BOOTSTRAP = {
    'resamples': 200,
    'batches': 20,
    'confidence': 0.95,
}

# Tester acceptance thresholds (completeness / soundness)
TESTER_THRESHOLDS = {
    'completeness': 2 / 3,
    'soundness': 1 / 3,
}

# Instance counts of the verification suites; 'quick' divides them
VERIFY = {
    'ryser_matrices': 500,
    'ryser_max_side': 8,
    'representation_pairs': 200,
    'haar_moment_samples': 10**5,
    'one_sided_pairs': 200,
    'frobenius_grams': 500,
    'regime_grams': 500,
    'overlap_collections': 500,
    'bipartite_collections': 200,
    'tripartite_collections': 50,
    'chain_samples': 10**5,
    'far_state_draws': 50,
    'quick_divisor': 10,
}

# Report and run ledger
REPORT_SCHEMA = 1
VERSION = os.getenv('PRODTEST_VERSION', 'v0.1.0')
DATABASE_URL = os.getenv('PRODTEST_DATABASE_URL', '')
DEFAULT_SEED = 42

EXIT_CODES = {
    'ok': 0,
    'failure': 1,
    'usage': 2,
}
