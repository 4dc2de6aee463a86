"""Bell functionals, seesaw optimisation, local bounds and locality certificates."""
from .bounds import (LocalityCertificate, certify, general_bound, lemma1_epsilon,
                     lemma2_bound, quench_epsilon, r_star, select_formula)
from .functionals import (MeasurementAssignment, PartyNetwork, bell2_value, chsh_value,
                          delta_margin, general_value, horodecki_spin_sup)
from .inequality import (BellInequality, best_deterministic_strategy, chsh, gamma_constant,
                         inequality_from_dict, load_inequality, local_bound_bruteforce,
                         mermin3, save_inequality)
from .seesaw import (SeesawResult, bell2_sup_seesaw, chsh_sup_fixed_alice, chsh_sup_seesaw,
                     general_sup_seesaw, sign_operator)
