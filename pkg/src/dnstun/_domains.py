# Benign name pools for the two bundled environments. Order is popularity:
# weights fall off as a Zipf law over the list position.

SMART_HOME = """
google.com time.google.com connectivitycheck.gstatic.com clients3.google.com
api.smartthings.com dc.connect.smartthings.com device-metrics-us.amazon.com
avs-alexa-na.amazon.com api.amazonalexa.com dcape-na.amazon.com ntp-g7g.amazon.com
a2z.com fireoscaptiveportal.com spectrum.s3.amazonaws.com
a3lj2kbsbgwvkl-ats.iot.us-east-1.amazonaws.com pool.ntp.org 0.pool.ntp.org
1.pool.ntp.org 2.pool.ntp.org netflix.com ichnaea.netflix.com nrdp.prod.cloud.netflix.com
occ-0-1007-1001.1.nflxso.net samsungcloudsolution.com osb.samsungqbe.com
lcprd1.samsungcloudsolution.net time.samsungcloudsolution.com tplinkcloud.com
use1-api.tplinkra.com n-devs.tplinkcloud.com meethue.com ws.meethue.com diag.meethue.com
firmware.meethue.com youtube.com i.ytimg.com r4---sn-4g5e6nsz.googlevideo.com
r2---sn-ab5l6nrs.googlevideo.com nest.com frontdoor.nest.com czfe82-front01-iad01.transport.home.nest.com
spotify.com apresolve.spotify.com audio-ak-spotify-com.akamaized.net xbcs.net
d3p8zr0ffa9t17.cloudfront.net d1n3ms9sn7orcq.cloudfront.net akamaized.net
lgtvsdp.com us.lgtvsdp.com aic-ngfts.lge.com roku.com scribe.logs.roku.com
api.roku.com ring.com fw.ring.com es.ring.com wyze.com api.wyzecam.com
mqtt.googleapis.com firebaselogging-pa.googleapis.com www.googleapis.com
dns.msftncsi.com www.msftconnecttest.com ctldl.windowsupdate.com
e2.dscb.akamaiedge.net e6858.dsce9.akamaiedge.net a1089.dscd.akamai.net
sonos.com msmetrics.ws.sonos.com update.sonos.com ecobee.com api.ecobee.com
tuyaus.com a1.tuyaus.com m1.tuyaus.com weather.com api.weather.com
ipcamlive.com p2p5.cloudlinks.cn iotx-hz.aliyuncs.com
""".split()

WORKSTATION = """
ubuntu.com archive.ubuntu.com security.ubuntu.com ntp.ubuntu.com
changelogs.ubuntu.com api.snapcraft.io security.debian.org deb.debian.org
play.googleapis.com android.clients.google.com firebaseinstallations.googleapis.com
mtalk.google.com www.google.com accounts.google.com fonts.gstatic.com
lh3.googleusercontent.com play-lh.googleusercontent.com
github.com api.github.com objects.githubusercontent.com avatars.githubusercontent.com
pypi.org files.pythonhosted.org registry.npmjs.org microsoft.com
login.microsoftonline.com graph.microsoft.com v10.events.data.microsoft.com
whatsapp.net mmg.whatsapp.net g.whatsapp.net instagram.com
scontent-ams4-1.cdninstagram.com graph.instagram.com wikipedia.org
en.wikipedia.org upload.wikimedia.org duckduckgo.com links.duckduckgo.com
cloudflare.com one.one.one.one cdnjs.cloudflare.com
stackoverflow.com cdn.sstatic.net slack.com edgeapi.slack.com
wss-primary.slack.com zoom.us us04web.zoom.us docker.io
registry-1.docker.io production.cloudflare.docker.com
mozilla.org firefox.settings.services.mozilla.com push.services.mozilla.com
incoming.telemetry.mozilla.org detectportal.firefox.com
e3913.cd.akamaiedge.net d2c8v52ll5s99u.cloudfront.net
s3.eu-west-1.amazonaws.com ec2-54-72-10-3.eu-west-1.compute.amazonaws.com
telegram.org web.telegram.org dropbox.com client.dropbox.com
bolt.dropbox.com reddit.com www.redditstatic.com i.redd.it
linkedin.com static.licdn.com twitter.com abs.twimg.com pbs.twimg.com
""".split()


def zipf(names, exponent=0.8):
    return tuple((name, round(1.0 / (rank + 1) ** exponent, 6)) for rank, name in enumerate(names))
