"""The instance where finetuning saves a polynomial amount of data.

On this instance the first target direction is barely excited by the source
(its source eigenvalue is eps^2) and all but one of the other target
directions are invisible to it. Supervised learning and pretraining both need a
polynomial number of samples in 1/eps to reach risk eps. Pretraining on a
modest budget followed by finetuning gets there with about
ln(1/eps)^2 / eps target samples.

    python demos/example1.py --eps 1/4,1/16,1/64
"""

import argparse
from fractions import Fraction

from covshift.bounds import finetune_sufficient_m, format_index_set, h_over_g_norm, pretrain_sufficient_m
from covshift.experiments import example1_study
from covshift.instance import make_example1_instance


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--eps", default="1/4,1/16,1/64")
    parser.add_argument("--cap", type=int, default=10**7)
    args = parser.parse_args()
    eps_list = tuple(float(Fraction(tok)) for tok in args.eps.split(","))

    res = example1_study(eps_list, cap=args.cap)
    print(f"{'eps':>9} {'N supervised':>13} {'M pretrain':>11} {'M+N finetune':>13} {'finetune risk/eps':>18}")
    for r in res.rows:
        n = "saturated" if r.n_supervised is None else r.n_supervised
        m = "saturated" if r.m_pretrain is None else r.m_pretrain
        print(f"{r.eps:>9.5g} {n!s:>13} {m!s:>11} {r.m_finetune + r.n_finetune:>13} {r.risk_finetune / r.eps:>18.3f}")
    print(f"\nfitted exponent of N supervised: {res.supervised_exponent:.2f}")
    print(f"fitted exponent of M pretrain:   {res.pretrain_exponent:.2f}")

    print("\nsource-size thresholds for N_sup = 1000, gamma_sup = 0.2:")
    for eps in eps_list:
        inst = make_example1_instance(eps)
        m3, k_star, d_sup, ratio = pretrain_sufficient_m(inst, 1000, 0.2)
        m4, k_dag = finetune_sufficient_m(inst, 1000, 0.2, 2000)
        print(f"  eps={eps:.5g}: K* = {{{format_index_set(k_star)}}}, ||H_K*||_G = {ratio:.4g}, M3 = {m3:.4g}")
        print(f"  {'':>{len(f'eps={eps:.5g}')}}  K+ = {{{format_index_set(k_dag)}}}, "
              f"||H_K+||_G = {h_over_g_norm(inst, k_dag):.4g}, M4 = {m4:.4g}")


if __name__ == "__main__":
    main()
