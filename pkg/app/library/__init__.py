# Library case study
