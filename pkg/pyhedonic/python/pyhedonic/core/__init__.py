"""Domain model, hedonic scoring, genetic search, matching and the session engine"""
