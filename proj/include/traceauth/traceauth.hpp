#pragma once

// Umbrella header: identity verification from historical geo-location
// traces. Pipeline: raw traces -> resampling -> location clustering ->
// observation encoding -> sequence verifiers (SM, MC, MSHMM) -> windowed
// EER evaluation.

#include "traceauth/clustering.hpp"
#include "traceauth/data_io.hpp"
#include "traceauth/evaluation.hpp"
#include "traceauth/format.hpp"
#include "traceauth/geo.hpp"
#include "traceauth/observation.hpp"
#include "traceauth/rng.hpp"
#include "traceauth/synth.hpp"
#include "traceauth/time.hpp"
#include "traceauth/verifier_mc.hpp"
#include "traceauth/verifier_mshmm.hpp"
#include "traceauth/verifier_sm.hpp"
