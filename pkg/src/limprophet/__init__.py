"""Limited-information prophet inequalities: algorithms, mechanisms and exact checks."""
