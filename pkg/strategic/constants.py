NASH_EPS = 1e-12            # slack on best-response checks in stage matrices
QLK_LAMBDAS = (0.5, 1.0)    # logit precisions of the QLk baseline
QLK_LAMBDA = 1.0
QLK_MATCH_PROBABILITY = 0.5
