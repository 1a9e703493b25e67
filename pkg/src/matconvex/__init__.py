"""Matrix functional calculus and centrality detection through local convexity."""
