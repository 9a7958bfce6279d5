"""Monte-Carlo and quadrature checks of the model's supporting lemmas."""
