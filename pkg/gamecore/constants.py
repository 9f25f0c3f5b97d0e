HORIZON_S = 6.0         # Δt_h
PERIOD_S = 2.0          # Δt_p
DISCOUNT = 0.9          # δ
SIGMOID_ALPHA = 1.5     # 1/m
SIGMOID_D0 = 2.0        # m
TYPE_GRID = (-1.0, -0.5, 0.0, 0.5, 1.0)

TOL = 1e-9

AC_DIRECTIONS = ("le", "ge")
