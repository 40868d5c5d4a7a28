"""Symbolic and numerical engine for factorized time-evolution operators.

The package derives, for any closed Lie algebra given by structure
constants or matrix generators, the coupling matrix between input
coefficients and product-form coordinates, the coupled and decoupled
coordinate ODE systems, the one-parameter factorization flow, closed-form
three-generator composition laws, su(N) Cartan-Weyl bases with explicit
evolution operators, and numeric integration with gate verification.
"""

from .symcore import (Coefficient, Expr, ParseError, RationalExpr, SymMatrix,
                      Symbol, UnboundSymbolError, UnsupportedFormError,
                      eta_sym, eval_numeric, exact_div, lambda_sym,
                      normalize, param_sym, parse_expr, render, render_matrix,
                      small_lambda_sym, substitute, symbol_name, theta_sym)
from .liealg import (Algebra, AlgebraError, AlgebraFileError, ClosureError,
                     Finding, StructureTensor, TransverseMatrix,
                     ValidationReport, algebra_from_dict, algebra_to_dict,
                     from_matrix_generators, from_structure_constants,
                     load_algebra, reorder, shipped_algebra,
                     shipped_algebra_names, transverse_matrix, validate)
from .matexp import (ExpClass, MatexpError, UnsupportedMatrixError, classify,
                     eigenvalues_exact, sym_exp, sym_exp_scaled)
from .weinorman import (BCHMatrixSet, BranchSingularityError, ConstraintCheck,
                        CoupledSystem, CouplingMatrix, LieVector, ODESystem,
                        SingularCouplingError, UnitarityReport,
                        bch_closed_form_3gen, bch_matrices, coupled_odes,
                        coupling_matrix, decoupled_odes, factorization_odes,
                        nested_similarity, similarity_transform,
                        unitarity_check_su2)
from .sun import (GeneratorSet, explicit_teo, gellmann_generators,
                  sun_generators)
from .propagate import (EtaBinding, IntegrationError, Trajectory,
                        assemble_teo_numeric, direct_exponential, gate_matrix,
                        integrate, matrix_oracle, qubit_generators,
                        residual_check, verify_gate)
from .fixtures import (FixtureResult, fixture_names, report_lines,
                       run_fixtures)

__version__ = "0.1.0"

__all__ = [
    "Algebra", "AlgebraError", "AlgebraFileError", "BCHMatrixSet",
    "BranchSingularityError", "ClosureError", "Coefficient",
    "ConstraintCheck", "CoupledSystem", "CouplingMatrix", "EtaBinding",
    "ExpClass", "Expr", "Finding", "FixtureResult", "GeneratorSet",
    "IntegrationError", "LieVector", "MatexpError", "ODESystem",
    "ParseError", "RationalExpr", "SingularCouplingError", "StructureTensor",
    "SymMatrix", "Symbol", "Trajectory", "TransverseMatrix",
    "UnboundSymbolError", "UnitarityReport", "UnsupportedFormError",
    "UnsupportedMatrixError", "ValidationReport", "algebra_from_dict",
    "algebra_to_dict", "assemble_teo_numeric", "bch_closed_form_3gen",
    "bch_matrices", "classify", "coupled_odes", "coupling_matrix",
    "decoupled_odes", "direct_exponential", "eigenvalues_exact", "eta_sym",
    "eval_numeric", "exact_div", "explicit_teo", "factorization_odes",
    "fixture_names", "from_matrix_generators", "from_structure_constants",
    "gate_matrix", "gellmann_generators", "integrate", "lambda_sym",
    "load_algebra", "matrix_oracle", "nested_similarity", "normalize",
    "param_sym", "parse_expr", "qubit_generators", "render", "render_matrix",
    "reorder", "report_lines", "residual_check", "run_fixtures",
    "shipped_algebra", "shipped_algebra_names", "similarity_transform",
    "small_lambda_sym", "substitute", "sun_generators", "sym_exp",
    "sym_exp_scaled", "symbol_name", "theta_sym", "transverse_matrix",
    "unitarity_check_su2", "validate", "verify_gate",
]
