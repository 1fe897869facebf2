namespace revpulse {}
