"""Domain services: generators, recovery procedures, estimators and reporting."""
