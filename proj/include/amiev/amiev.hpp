#pragma once

#include "amiev/calib.hpp"
#include "amiev/error.hpp"
#include "amiev/event_io.hpp"
#include "amiev/events.hpp"
#include "amiev/frames.hpp"
#include "amiev/geometry.hpp"
#include "amiev/iwe.hpp"
#include "amiev/keyvalue.hpp"
#include "amiev/metrics.hpp"
#include "amiev/optics.hpp"
#include "amiev/params.hpp"
#include "amiev/scene.hpp"
#include "amiev/translate.hpp"
