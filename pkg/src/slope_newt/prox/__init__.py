from .jacobian import (BlockPartition, JacobianFactors, NewtonConfig, NewtonOperator, RunType, Strategy,
                       active_partition, assemble_newton_operator, jacobian_factors, m_matvec,
                       solve_newton_system)
from .sorted_prox import (ProxResult, SignedPermutation, dual_ball_violation, prox_conjugate_scaled,
                          prox_scaled, prox_sorted_l1, x_lambda)
